//! Per-technology variable-cost bounds from fuel and carbon prices,
//! efficiencies and renewable bid parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{PRICE_CAP, PRICE_FLOOR};

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("efficiency must be positive, got {0}")]
    NonPositiveEfficiency(f64),
    #[error("bid bounds must satisfy low <= 0 <= high, got ({0}, {1})")]
    InvalidBids(f64, f64),
    #[error("no price series for fuel {0}")]
    MissingFuelSeries(String),
}

/// Cheap and expensive end of a technology's stack, EUR/MWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBounds {
    pub low: f64,
    pub high: f64,
}

impl CostBounds {
    /// Sorted, clamped bounds from two candidate costs.
    pub fn from_candidates(a: f64, b: f64) -> Self {
        let clamp = |v: f64| v.clamp(PRICE_FLOOR, PRICE_CAP);
        CostBounds {
            low: clamp(a.min(b)),
            high: clamp(a.max(b)),
        }
    }

    /// A flat stack at a single cost.
    pub fn flat(cost: f64) -> Self {
        CostBounds { low: cost, high: cost }
    }

    pub fn is_flat(&self) -> bool {
        self.low == self.high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPair {
    pub eta_low: f64,
    pub eta_high: f64,
}

impl EfficiencyPair {
    pub fn new(eta_low: f64, eta_high: f64) -> Result<Self, CostError> {
        for eta in [eta_low, eta_high] {
            if eta.is_nan() || eta <= 0.0 {
                return Err(CostError::NonPositiveEfficiency(eta));
            }
        }
        Ok(EfficiencyPair { eta_low, eta_high })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResBidPair {
    pub low: f64,
    pub high: f64,
}

impl ResBidPair {
    pub fn new(low: f64, high: f64) -> Result<Self, CostError> {
        if !(low <= 0.0 && 0.0 <= high) {
            return Err(CostError::InvalidBids(low, high));
        }
        Ok(ResBidPair { low, high })
    }
}

/// Costs evaluated at each efficiency, before sorting. Kept for
/// diagnostics: with `eta_low < eta_high` the `eta_low` cost is the
/// higher one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RawCosts {
    pub at_eta_low: f64,
    pub at_eta_high: f64,
}

impl RawCosts {
    pub fn sorted(&self) -> CostBounds {
        CostBounds::from_candidates(self.at_eta_low, self.at_eta_high)
    }
}

/// `(fuel + co2_intensity * eua) / eta + other_cost` at both efficiencies.
#[inline]
pub fn raw_conventional_costs(
    fuel_price: f64,
    eua_price: f64,
    co2_intensity: f64,
    eff: EfficiencyPair,
    other_cost: f64,
) -> RawCosts {
    let thermal = fuel_price + co2_intensity * eua_price;
    RawCosts {
        at_eta_low: thermal / eff.eta_low + other_cost,
        at_eta_high: thermal / eff.eta_high + other_cost,
    }
}

pub fn conventional_cost_bounds(
    fuel_price: f64,
    eua_price: f64,
    co2_intensity: f64,
    eff: EfficiencyPair,
    other_cost: f64,
) -> Result<CostBounds, CostError> {
    for eta in [eff.eta_low, eff.eta_high] {
        if eta.is_nan() || eta <= 0.0 {
            return Err(CostError::NonPositiveEfficiency(eta));
        }
    }
    Ok(raw_conventional_costs(fuel_price, eua_price, co2_intensity, eff, other_cost).sorted())
}

/// Renewables bid between their two bid prices: the conventional formula
/// with zero fuel, zero intensity and unit efficiency.
pub fn res_cost_bounds(bids: ResBidPair) -> CostBounds {
    CostBounds::from_candidates(bids.low, bids.high)
}

/// Cost bounds of every stack assembled for hour `t`, keyed by stack id.
pub fn cost_bounds_for_hour(
    model: &crate::stack_assembly::MeritOrderModel<'_>,
    params: &crate::stack_assembly::ParameterSet,
    t: usize,
    mode: crate::stack_assembly::Mode,
) -> Result<BTreeMap<String, CostBounds>, crate::stack_assembly::AssemblyError> {
    let hour = model.assemble_hour(params, t, mode)?;
    Ok(hour
        .stacks
        .iter()
        .zip(&hour.provenance)
        .map(|(s, p)| (p.id.clone(), s.bounds))
        .collect())
}

/// Expert efficiencies and CO2 intensities per fuel:
/// `(eta_low, eta_high, co2_intensity)`.
pub fn expert_estimates(fuel: crate::market_data::Fuel) -> (EfficiencyPair, f64) {
    use crate::market_data::Fuel::*;
    let (lo, hi, eps) = match fuel {
        Lignite => (0.30, 0.43, 0.40),
        Coal => (0.35, 0.46, 0.30),
        Gas => (0.25, 0.40, 0.20),
        Oil => (0.24, 0.44, 0.30),
        Nuclear => (0.32, 0.42, 0.03),
    };
    (EfficiencyPair { eta_low: lo, eta_high: hi }, eps)
}
