//! Synthetic markets priced by the model itself at a known parameter set.
//!
//! The generated price is the merit-order price at the ground-truth
//! parameters plus optional i.i.d. Gaussian noise, which makes the fixture
//! an exact oracle for the estimation and pricing code.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{DateTime, Datelike, Duration, Timelike, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataError, Fuel, HourlyPanel, PlantCatalog, PlantRole, SeriesKey, VolumeSource, PRICE_CAP, PRICE_FLOOR};
use crate::stack_assembly::{GroupMask, MeritOrderModel, Mode, ParameterSet, PricingScratch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Mean plus sinusoidal daily and annual swings.
    #[default]
    Flat,
    /// Zero at night, a half-sine between 06:00 and 18:00 scaled by
    /// `mean` as the noon peak, higher in summer.
    Solar,
}

/// Hourly profile: deterministic shape plus AR(1) Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeriesProfile {
    pub mean: f64,
    pub daily_amplitude: f64,
    pub annual_amplitude: f64,
    /// Amplitude of a weekly cycle (lower on weekends when positive).
    pub weekly_amplitude: f64,
    pub noise: f64,
    /// AR(1) coefficient of the noise, in `[0, 1)`.
    pub persistence: f64,
    pub shape: Shape,
    /// Values are floored here (`None` for signed series).
    pub min: Option<f64>,
}

impl Default for SeriesProfile {
    fn default() -> Self {
        SeriesProfile {
            mean: 0.0,
            daily_amplitude: 0.0,
            annual_amplitude: 0.0,
            weekly_amplitude: 0.0,
            noise: 0.0,
            persistence: 0.0,
            shape: Shape::Flat,
            min: Some(0.0),
        }
    }
}

impl SeriesProfile {
    pub fn flat(mean: f64) -> Self {
        SeriesProfile {
            mean,
            ..Default::default()
        }
    }

    fn deterministic(&self, ts: DateTime<Utc>) -> f64 {
        let hour = ts.hour() as f64;
        let doy = ts.ordinal() as f64;
        let annual = (2.0 * PI * doy / 365.25).cos();
        let weekend = if ts.weekday().number_from_monday() >= 6 { 1.0 } else { 0.0 };
        let base = match self.shape {
            Shape::Flat => {
                self.mean + self.daily_amplitude * (2.0 * PI * (hour - 9.0) / 24.0).sin()
                    + self.annual_amplitude * annual
            }
            Shape::Solar => {
                let day = if (6.0..=18.0).contains(&hour) { (PI * (hour - 6.0) / 12.0).sin() } else { 0.0 };
                // Summer peak: the annual term is negative in winter.
                let season = 1.0 - self.annual_amplitude * annual;
                self.mean * day * season.max(0.0)
            }
        };
        base - self.weekly_amplitude * weekend
    }

    fn generate(&self, index: &[DateTime<Utc>], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut ar = 0.0;
        let innovation = self.noise * (1.0 - self.persistence * self.persistence).max(0.0).sqrt();
        index
            .iter()
            .map(|&ts| {
                let z: f64 = normal.sample(rng);
                ar = self.persistence * ar + innovation * z;
                let mut v = self.deterministic(ts);
                if self.shape == Shape::Solar {
                    if v > 0.0 {
                        v *= 1.0 + ar / self.mean.max(1.0);
                    }
                } else {
                    v += ar;
                }
                match self.min {
                    Some(m) => v.max(m),
                    None => v,
                }
            })
            .collect()
    }
}

/// Daily Gaussian random walk, broadcast to the hours of each UTC day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkSpec {
    pub start: f64,
    pub step: f64,
    pub min: f64,
}

impl Default for WalkSpec {
    fn default() -> Self {
        WalkSpec {
            start: 20.0,
            step: 0.5,
            min: 1.0,
        }
    }
}

impl WalkSpec {
    pub fn new(start: f64, step: f64, min: f64) -> Self {
        WalkSpec { start, step, min }
    }

    fn generate(&self, index: &[DateTime<Utc>], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut value = self.start;
        let mut day = index[0].date_naive();
        index
            .iter()
            .map(|ts| {
                if ts.date_naive() != day {
                    day = ts.date_naive();
                    let z: f64 = normal.sample(rng);
                    value = (value + self.step * z).max(self.min);
                }
                value
            })
            .collect()
    }
}

/// JSON description of a synthetic market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub start: DateTime<Utc>,
    pub hours: usize,
    /// Technologies kept from the default catalog (ignored when
    /// `catalog` is given).
    pub plants: Vec<String>,
    pub catalog: Option<PlantCatalog>,
    /// Capacity profile of each capacity-based plant and generation
    /// profile of each generation-based plant.
    pub volumes: BTreeMap<String, SeriesProfile>,
    pub load: SeriesProfile,
    /// Standard deviation of the day-ahead load forecast error.
    pub load_da_noise: f64,
    /// Relative standard deviation of renewable day-ahead forecast errors.
    pub res_da_noise: f64,
    pub fuels: BTreeMap<Fuel, WalkSpec>,
    pub eua: WalkSpec,
    pub hydro: Option<SeriesProfile>,
    pub net_import: Option<SeriesProfile>,
    /// Groups of the ground-truth parameter set.
    pub active_groups: GroupMask,
    /// Ground-truth values that differ from the classical ones.
    pub theta: BTreeMap<String, f64>,
    /// Standard deviation of the i.i.d. price noise.
    pub price_noise: f64,
}

impl Default for SynthSpec {
    /// A five-technology year: gas, coal and lignite against PV and
    /// onshore wind, with efficiencies that differ from the expert values.
    fn default() -> Self {
        let start = DateTime::parse_from_rfc3339("2023-01-01T00:00:00Z")
            .expect("static timestamp")
            .with_timezone(&Utc);
        let mut volumes = BTreeMap::new();
        let capacity = |mean: f64| SeriesProfile {
            mean,
            annual_amplitude: 0.05 * mean,
            noise: 0.03 * mean,
            persistence: 0.9,
            ..Default::default()
        };
        volumes.insert("gas".into(), capacity(20_000.0));
        volumes.insert("coal".into(), capacity(14_000.0));
        volumes.insert("lignite".into(), capacity(13_000.0));
        volumes.insert(
            "pv".into(),
            SeriesProfile {
                mean: 30_000.0,
                annual_amplitude: 0.6,
                noise: 3000.0,
                persistence: 0.8,
                shape: Shape::Solar,
                ..Default::default()
            },
        );
        volumes.insert(
            "wind_onshore".into(),
            SeriesProfile {
                mean: 13_000.0,
                annual_amplitude: 3000.0,
                noise: 7000.0,
                persistence: 0.97,
                ..Default::default()
            },
        );
        let mut fuels = BTreeMap::new();
        fuels.insert(Fuel::Gas, WalkSpec::new(40.0, 1.2, 5.0));
        fuels.insert(Fuel::Coal, WalkSpec::new(12.0, 0.3, 2.0));
        fuels.insert(Fuel::Lignite, WalkSpec::new(5.0, 0.0, 5.0));
        fuels.insert(Fuel::Oil, WalkSpec::new(45.0, 1.0, 5.0));
        fuels.insert(Fuel::Nuclear, WalkSpec::new(3.0, 0.0, 3.0));
        let mut theta = BTreeMap::new();
        for (name, value) in [
            ("eta_low.gas", 0.32),
            ("eta_high.gas", 0.55),
            ("eta_low.coal", 0.30),
            ("eta_high.coal", 0.42),
            ("eta_low.lignite", 0.33),
            ("eta_high.lignite", 0.40),
        ] {
            theta.insert(name.to_string(), value);
        }
        SynthSpec {
            start,
            hours: 8760,
            plants: ["gas", "coal", "lignite", "pv", "wind_onshore"].map(String::from).to_vec(),
            catalog: None,
            volumes,
            load: SeriesProfile {
                mean: 52_000.0,
                daily_amplitude: 9000.0,
                annual_amplitude: 5000.0,
                weekly_amplitude: 6000.0,
                noise: 2500.0,
                persistence: 0.9,
                ..Default::default()
            },
            load_da_noise: 800.0,
            res_da_noise: 0.08,
            fuels,
            eua: WalkSpec::new(80.0, 1.5, 10.0),
            hydro: None,
            net_import: None,
            active_groups: GroupMask::empty().with(crate::stack_assembly::ParamGroup::Efficiencies),
            theta,
            price_noise: 0.0,
        }
    }
}

impl SynthSpec {
    pub fn from_json(text: &str) -> Result<Self, DataError> {
        serde_json::from_str(text).map_err(|e| DataError::Parse {
            path: "synthetic spec".into(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn catalog(&self) -> Result<PlantCatalog, DataError> {
        match &self.catalog {
            Some(c) => Ok(c.clone()),
            None => {
                let ids: Vec<&str> = self.plants.iter().map(String::as_str).collect();
                PlantCatalog::german_default().restricted_to(&ids)
            }
        }
    }
}

/// A generated market with its generating parameters.
#[derive(Debug, Clone)]
pub struct SyntheticMarket {
    pub catalog: PlantCatalog,
    pub panel: HourlyPanel,
    pub theta_star: ParameterSet,
    /// Prices before noise.
    pub clean_price: Vec<f64>,
}

fn invalid(msg: impl Into<String>) -> DataError {
    DataError::InfeasibleSpec(msg.into())
}

/// Generate the market described by `spec`; identical for equal seeds.
pub fn synthesize_market(spec: &SynthSpec, seed: u64) -> Result<SyntheticMarket, DataError> {
    if spec.hours == 0 {
        return Err(invalid("zero hours"));
    }
    let catalog = spec.catalog()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index: Vec<DateTime<Utc>> = (0..spec.hours).map(|h| spec.start + Duration::hours(h as i64)).collect();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut series = BTreeMap::new();

    for p in catalog.enabled().filter(|p| p.role == PlantRole::Standard) {
        let profile = spec
            .volumes
            .get(&p.id)
            .ok_or_else(|| invalid(format!("no volume profile for {}", p.id)))?;
        let values = profile.generate(&index, &mut rng);
        match p.volume {
            VolumeSource::Capacity => {
                series.insert(SeriesKey::Capacity(p.id.clone()), values);
            }
            VolumeSource::Generation => {
                let da = values
                    .iter()
                    .map(|&v| {
                        let z: f64 = normal.sample(&mut rng);
                        (v * (1.0 + spec.res_da_noise * z)).max(0.0)
                    })
                    .collect();
                series.insert(SeriesKey::Generation(p.id.clone()), values);
                series.insert(SeriesKey::ResDa(p.id.clone()), da);
            }
        }
    }
    let load = spec.load.generate(&index, &mut rng);
    let load_da = load
        .iter()
        .map(|&l| {
            let z: f64 = normal.sample(&mut rng);
            (l + spec.load_da_noise * z).max(0.0)
        })
        .collect();
    series.insert(SeriesKey::LoadActual, load);
    series.insert(SeriesKey::LoadDa, load_da);
    for fuel in catalog.fuels() {
        let walk = spec
            .fuels
            .get(&fuel)
            .ok_or_else(|| invalid(format!("no price walk for fuel {fuel}")))?;
        series.insert(SeriesKey::FuelPrice(fuel), walk.generate(&index, &mut rng));
    }
    series.insert(SeriesKey::Eua, spec.eua.generate(&index, &mut rng));
    if let Some(h) = &spec.hydro {
        series.insert(SeriesKey::Hydro, h.generate(&index, &mut rng));
    }
    if let Some(n) = &spec.net_import {
        series.insert(SeriesKey::NetImport, n.generate(&index, &mut rng));
    }
    let mut panel = HourlyPanel::new(index, series)?;

    let model = MeritOrderModel::new(&catalog, &panel).map_err(|e| invalid(e.to_string()))?;
    let mut theta = model.classical().with_groups(spec.active_groups);
    for (name, &value) in &spec.theta {
        theta.set(name, value).map_err(|e| invalid(e.to_string()))?;
    }
    let mut clean = Vec::with_capacity(spec.hours);
    let mut scratch = PricingScratch::default();
    for t in 0..spec.hours {
        let hour = model.assemble_hour(&theta, t, Mode::Train).map_err(|e| invalid(e.to_string()))?;
        let total: f64 = hour.stacks.iter().map(|s| s.cap).sum();
        if hour.effective_load > total {
            return Err(invalid(format!(
                "load {} exceeds assembled capacity {total} at {}",
                hour.effective_load,
                panel.ts(t)
            )));
        }
        clean.push(model.price_with(&theta, t, Mode::Train, &mut scratch).map_err(|e| invalid(e.to_string()))?);
    }
    let price = clean
        .iter()
        .map(|&p| {
            let z: f64 = normal.sample(&mut rng);
            (p + spec.price_noise * z).clamp(PRICE_FLOOR, PRICE_CAP)
        })
        .collect();
    drop(model);
    panel.set_series(SeriesKey::Price, price)?;
    Ok(SyntheticMarket {
        catalog,
        panel,
        theta_star: theta,
        clean_price: clean,
    })
}
