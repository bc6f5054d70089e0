//! Browser demo: a small fleet edited in the page, turned into a merit-order
//! curve, cleared at a load and swept over one fuel price.
//!
//! The plain functions take and return JSON strings so they can be tested
//! natively; the `wasm_*` wrappers expose them to JavaScript.

use std::collections::BTreeMap;

use merit_core::marginal_costs::{conventional_cost_bounds, expert_estimates, CostBounds, EfficiencyPair};
use merit_core::market_data::Fuel;
use merit_core::merit_curve::{aggregate, components_at, PiecewiseCurve, PlantStack};
use serde::{Deserialize, Serialize};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// One technology in the demo fleet. Fuel-fired plants take their costs from
/// the fuel and EUA prices; the rest bid between `bid_low` and `bid_high`.
#[derive(Debug, Clone, Deserialize)]
pub struct DemoPlant {
    pub name: String,
    pub capacity: f64,
    #[serde(default)]
    pub fuel: Option<Fuel>,
    /// Expert values for the fuel when absent.
    #[serde(default)]
    pub eta_low: Option<f64>,
    #[serde(default)]
    pub eta_high: Option<f64>,
    #[serde(default)]
    pub bid_low: f64,
    #[serde(default)]
    pub bid_high: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Fleet {
    pub eua: f64,
    #[serde(default)]
    pub fuels: BTreeMap<Fuel, f64>,
    pub plants: Vec<DemoPlant>,
}

#[derive(Debug, Serialize)]
struct StackView<'a> {
    name: &'a str,
    capacity: f64,
    low: f64,
    high: f64,
}

impl Fleet {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("fleet: {e}"))
    }

    /// Stacks tagged by their position in `plants`.
    pub fn stacks(&self) -> Result<Vec<PlantStack>, String> {
        self.plants
            .iter()
            .enumerate()
            .map(|(tag, p)| {
                if p.capacity.is_nan() || p.capacity < 0.0 {
                    return Err(format!("{}: capacity must be nonnegative", p.name));
                }
                let bounds = match p.fuel {
                    Some(fuel) => {
                        let (expert, co2) = expert_estimates(fuel);
                        let eff = EfficiencyPair::new(
                            p.eta_low.unwrap_or(expert.eta_low),
                            p.eta_high.unwrap_or(expert.eta_high),
                        )
                        .map_err(|e| format!("{}: {e}", p.name))?;
                        let price = self
                            .fuels
                            .get(&fuel)
                            .copied()
                            .ok_or_else(|| format!("{}: no price for {}", p.name, fuel.as_str()))?;
                        conventional_cost_bounds(price, self.eua, co2, eff, 0.0).map_err(|e| format!("{}: {e}", p.name))?
                    }
                    None => CostBounds::from_candidates(p.bid_low, p.bid_high),
                };
                Ok(PlantStack::new(tag, p.capacity, bounds))
            })
            .collect()
    }

    fn curve(&self) -> Result<(Vec<PlantStack>, PiecewiseCurve), String> {
        let stacks = self.stacks()?;
        let curve = aggregate(&stacks).map_err(|e| e.to_string())?;
        Ok((stacks, curve))
    }

    /// Price at `load` with each plant's share of it, largest share first.
    fn clear_at(&self, stacks: &[PlantStack], curve: &PiecewiseCurve, load: f64) -> Result<serde_json::Value, String> {
        let d = components_at(stacks, curve, load).map_err(|e| e.to_string())?;
        let mut parts: Vec<_> = d
            .components
            .iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|&(tag, v)| json!({ "name": self.plants[tag].name, "component": v }))
            .collect();
        parts.sort_by(|a, b| b["component"].as_f64().unwrap().abs().total_cmp(&a["component"].as_f64().unwrap().abs()));
        let marginal = d.marginal().dominant().map(|tag| self.plants[tag].name.clone());
        Ok(json!({ "price": d.price, "marginal": marginal, "components": parts }))
    }
}

/// Stacks and breakpoints of the fleet's supply curve.
pub fn curve_json(fleet: &str) -> Result<String, String> {
    let fleet = Fleet::from_json(fleet)?;
    let (stacks, curve) = fleet.curve()?;
    let views: Vec<_> = stacks
        .iter()
        .map(|s| StackView {
            name: &fleet.plants[s.tag].name,
            capacity: s.cap,
            low: s.bounds.low,
            high: s.bounds.high,
        })
        .collect();
    Ok(json!({ "stacks": views, "points": curve.points(), "capacity": curve.total_capacity() }).to_string())
}

/// Clearing price at `load` and its split over the plants.
pub fn clear_json(fleet: &str, load: f64) -> Result<String, String> {
    let fleet = Fleet::from_json(fleet)?;
    let (stacks, curve) = fleet.curve()?;
    Ok(fleet.clear_at(&stacks, &curve, load)?.to_string())
}

/// Price and marginal plant at `load` as the price of `fuel` moves over
/// `steps` evenly spaced values from `from` to `to`.
pub fn sweep_json(fleet: &str, fuel: &str, from: f64, to: f64, steps: usize, load: f64) -> Result<String, String> {
    let mut fleet = Fleet::from_json(fleet)?;
    let fuel: Fuel = serde_json::from_value(json!(fuel)).map_err(|_| format!("unknown fuel {fuel}"))?;
    if steps < 2 {
        return Err("a sweep needs at least two steps".into());
    }
    let mut rows = Vec::with_capacity(steps);
    for i in 0..steps {
        let x = from + (to - from) * i as f64 / (steps - 1) as f64;
        fleet.fuels.insert(fuel, x);
        let (stacks, curve) = fleet.curve()?;
        let mut row = fleet.clear_at(&stacks, &curve, load)?;
        row["fuel_price"] = json!(x);
        rows.push(row);
    }
    Ok(serde_json::Value::Array(rows).to_string())
}

#[wasm_bindgen]
pub fn wasm_curve(fleet: &str) -> Result<String, JsValue> {
    curve_json(fleet).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn wasm_clear(fleet: &str, load: f64) -> Result<String, JsValue> {
    clear_json(fleet, load).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn wasm_sweep(fleet: &str, fuel: &str, from: f64, to: f64, steps: usize, load: f64) -> Result<String, JsValue> {
    sweep_json(fleet, fuel, from, to, steps, load).map_err(|e| JsValue::from_str(&e))
}
