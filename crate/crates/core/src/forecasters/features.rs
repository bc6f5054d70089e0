//! Regressor descriptors for the day/hour linear models and their
//! information timing.
//!
//! Forecasts for day `d` are issued at noon of `d - 1`. At that moment the
//! realized series are known up to hour [`AVAILABLE_HOURS`] of `d - 1`, the
//! day-ahead auction prices are known for all of `d - 1`, and day-ahead
//! load and renewable forecasts are published for `d` itself.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ForecastError;
use crate::market_data::{Fuel, HourlyPanel, PlantCatalog, SeriesKey};

/// Realized hours `0..AVAILABLE_HOURS` of the previous day are known at the
/// information cutoff; later hours of that day are read from two days back.
pub const AVAILABLE_HOURS: usize = 11;

/// Days between a realized value for hour `h` and the forecast day.
pub fn realized_shift(h: usize) -> usize {
    if h < AVAILABLE_HOURS {
        1
    } else {
        2
    }
}

/// One regressor, evaluated at forecast day `d` and hour `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feature {
    /// Value at `(d - lag, h)`.
    SameHour { series: SeriesKey, lag: usize },
    /// Value at hour `hour` of the latest day on which it is known:
    /// `d - 1` for morning hours and `d - 2` otherwise.
    CrossHour { series: SeriesKey, hour: usize },
    /// Value at `(d - lag - s, h)` where `s` is 0 for morning hours and 1
    /// otherwise, i.e. the `lag`-th latest known value of the same hour
    /// (`lag >= 1`).
    CutoffLag { series: SeriesKey, lag: usize },
    /// Sum of day-ahead series at `(d, h)`.
    DayAhead { series: Vec<SeriesKey> },
    /// Value at `(d - lag, hour)`.
    AtHour { series: SeriesKey, lag: usize, hour: usize },
    DailyMax { series: SeriesKey, lag: usize },
    DailyMin { series: SeriesKey, lag: usize },
    DailyMean { series: SeriesKey, lag: usize },
    /// Indicator of the weekday of `d`, 0 = Monday.
    Weekday { day: u8 },
    /// Annual Fourier term of day `d`: harmonic `k / 2 + 1`, sine for even
    /// `k` and cosine for odd.
    Season { k: u8 },
}

impl Feature {
    /// How many days before the forecast day the feature reaches back.
    pub fn reach(&self) -> usize {
        match self {
            Feature::SameHour { lag, .. }
            | Feature::AtHour { lag, .. }
            | Feature::DailyMax { lag, .. }
            | Feature::DailyMin { lag, .. }
            | Feature::DailyMean { lag, .. } => *lag,
            Feature::CrossHour { hour, .. } => realized_shift(*hour),
            Feature::CutoffLag { lag, .. } => lag + 1,
            Feature::DayAhead { .. } | Feature::Weekday { .. } | Feature::Season { .. } => 0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Feature::SameHour { series, lag } => format!("{series}[d-{lag},h]"),
            Feature::CrossHour { series, hour } => {
                format!("{series}[d-{},{hour}]", realized_shift(*hour))
            }
            Feature::CutoffLag { series, lag } => format!("{series}[d-{lag}-s(h),h]"),
            Feature::DayAhead { series } => {
                let names: Vec<String> = series.iter().map(ToString::to_string).collect();
                format!("{}[d,h]", names.join("+"))
            }
            Feature::AtHour { series, lag, hour } => format!("{series}[d-{lag},{hour}]"),
            Feature::DailyMax { series, lag } => format!("max {series}[d-{lag}]"),
            Feature::DailyMin { series, lag } => format!("min {series}[d-{lag}]"),
            Feature::DailyMean { series, lag } => format!("mean {series}[d-{lag}]"),
            Feature::Weekday { day } => format!("weekday{day}"),
            Feature::Season { k } => format!("season{k}"),
        }
    }

    fn resolve<'p>(&self, panel: &'p HourlyPanel) -> Result<Resolved<'p>, ForecastError> {
        let get = |key: &SeriesKey| {
            panel
                .get(key)
                .ok_or_else(|| ForecastError::MissingSeries(key.to_string()))
        };
        Ok(match self {
            Feature::SameHour { series, lag } => Resolved::Hourly { s: get(series)?, lag: *lag, hour: None },
            Feature::CrossHour { series, hour } => Resolved::Hourly {
                s: get(series)?,
                lag: realized_shift(*hour),
                hour: Some(*hour),
            },
            Feature::AtHour { series, lag, hour } => Resolved::Hourly {
                s: get(series)?,
                lag: *lag,
                hour: Some(*hour),
            },
            Feature::CutoffLag { series, lag } => Resolved::Cutoff { s: get(series)?, lag: *lag },
            Feature::DayAhead { series } => {
                Resolved::Sum(series.iter().map(get).collect::<Result<Vec<_>, _>>()?)
            }
            Feature::DailyMax { series, lag } => Resolved::Daily { s: get(series)?, lag: *lag, stat: Stat::Max },
            Feature::DailyMin { series, lag } => Resolved::Daily { s: get(series)?, lag: *lag, stat: Stat::Min },
            Feature::DailyMean { series, lag } => Resolved::Daily { s: get(series)?, lag: *lag, stat: Stat::Mean },
            Feature::Weekday { day } => Resolved::Weekday(*day),
            Feature::Season { k } => Resolved::Season(*k),
        })
    }
}

#[derive(Clone, Copy)]
enum Stat {
    Max,
    Min,
    Mean,
}

enum Resolved<'p> {
    Hourly { s: &'p [f64], lag: usize, hour: Option<usize> },
    Cutoff { s: &'p [f64], lag: usize },
    Sum(Vec<&'p [f64]>),
    Daily { s: &'p [f64], lag: usize, stat: Stat },
    Weekday(u8),
    Season(u8),
}

/// Whether the target is known for the whole previous day (auction
/// prices) or only up to the cutoff hour (realized quantities).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTiming {
    Auction,
    Realized,
}

impl TargetTiming {
    /// Latest day whose hour-`h` target is known when forecasting day `d`.
    pub fn last_known_day(self, d: usize, h: usize) -> Option<usize> {
        let shift = match self {
            TargetTiming::Auction => 1,
            TargetTiming::Realized => realized_shift(h),
        };
        d.checked_sub(shift)
    }
}

/// Regressor structure of one linear forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSpec {
    pub name: String,
    pub target: SeriesKey,
    pub timing: TargetTiming,
    pub features: Vec<Feature>,
    /// One submodel per hour of day; otherwise a single pooled model.
    pub per_hour: bool,
}

fn calendar() -> Vec<Feature> {
    let mut f: Vec<Feature> = (0..4).map(|k| Feature::Season { k }).collect();
    f.extend((0..7).map(|day| Feature::Weekday { day }));
    f
}

fn res_da_keys(panel: &HourlyPanel) -> Vec<SeriesKey> {
    panel
        .series()
        .keys()
        .filter(|k| matches!(k, SeriesKey::ResDa(_)))
        .cloned()
        .collect()
}

impl LinearSpec {
    /// Hydro generation: cross-hour lags, same-hour lags for days 2 to 14,
    /// annual and weekly seasonality (48 regressors).
    pub fn hydro() -> Self {
        let s = SeriesKey::Hydro;
        let mut features: Vec<Feature> = (0..24).map(|hour| Feature::CrossHour { series: s.clone(), hour }).collect();
        features.extend((2..=14).map(|lag| Feature::SameHour { series: s.clone(), lag }));
        features.extend(calendar());
        LinearSpec {
            name: "hydro".into(),
            target: s,
            timing: TargetTiming::Realized,
            features,
            per_hour: true,
        }
    }

    /// Net import: day-ahead load and renewables of the home zone and of
    /// every neighbouring zone in the panel, the latest known generation of
    /// each conventional plant of `catalog` present in the panel, and 14
    /// lags of net import.
    pub fn net_import(panel: &HourlyPanel, catalog: &PlantCatalog) -> Self {
        let mut features = vec![Feature::DayAhead { series: vec![SeriesKey::LoadDa] }];
        let zones: Vec<&SeriesKey> = panel.series().keys().collect();
        for key in &zones {
            if let SeriesKey::ZoneLoadDa(_) = key {
                features.push(Feature::DayAhead { series: vec![(*key).clone()] });
            }
        }
        for key in res_da_keys(panel) {
            features.push(Feature::DayAhead { series: vec![key] });
        }
        for key in &zones {
            if let SeriesKey::ZoneResDa(_) = key {
                features.push(Feature::DayAhead { series: vec![(*key).clone()] });
            }
        }
        for plant in catalog.conventionals() {
            let key = SeriesKey::Generation(plant.id.clone());
            if panel.get(&key).is_some() {
                features.push(Feature::CutoffLag { series: key, lag: 1 });
            }
        }
        features.extend((1..=14).map(|lag| Feature::CutoffLag { series: SeriesKey::NetImport, lag }));
        LinearSpec {
            name: "net_import".into(),
            target: SeriesKey::NetImport,
            timing: TargetTiming::Realized,
            features,
            per_hour: true,
        }
    }

    /// Price expert model: 14 same-hour price lags, yesterday's max, min
    /// and last hour, day-ahead load and total renewables, fuel and EUA
    /// prices two days back, weekly and annual seasonality. Fuel terms whose
    /// series are absent from the panel are left out.
    pub fn expert(panel: &HourlyPanel) -> Self {
        let p = SeriesKey::Price;
        let mut features: Vec<Feature> = (1..=14).map(|lag| Feature::SameHour { series: p.clone(), lag }).collect();
        features.push(Feature::DailyMax { series: p.clone(), lag: 1 });
        features.push(Feature::DailyMin { series: p.clone(), lag: 1 });
        features.push(Feature::AtHour { series: p.clone(), lag: 1, hour: 23 });
        features.push(Feature::DayAhead { series: vec![SeriesKey::LoadDa] });
        features.push(Feature::DayAhead { series: res_da_keys(panel) });
        for key in [
            SeriesKey::FuelPrice(Fuel::Gas),
            SeriesKey::FuelPrice(Fuel::Coal),
            SeriesKey::FuelPrice(Fuel::Oil),
            SeriesKey::Eua,
        ] {
            if panel.get(&key).is_some() {
                features.push(Feature::DailyMean { series: key, lag: 2 });
            }
        }
        features.extend(calendar());
        LinearSpec {
            name: "expert".into(),
            target: p,
            timing: TargetTiming::Auction,
            features,
            per_hour: true,
        }
    }

    /// Days of history the features need before the first usable day.
    pub fn reach(&self) -> usize {
        self.features.iter().map(Feature::reach).max().unwrap_or(0)
    }

    pub fn labels(&self) -> Vec<String> {
        self.features.iter().map(Feature::label).collect()
    }

    pub(crate) fn bind<'p>(&self, panel: &'p HourlyPanel) -> Result<BoundSpec<'p>, ForecastError> {
        panel.require_day_aligned()?;
        let features = self.features.iter().map(|f| f.resolve(panel)).collect::<Result<_, _>>()?;
        let target = panel
            .get(&self.target)
            .ok_or_else(|| ForecastError::MissingSeries(self.target.to_string()))?;
        Ok(BoundSpec { panel, features, target })
    }
}

/// A spec with its series resolved against one panel.
pub(crate) struct BoundSpec<'p> {
    panel: &'p HourlyPanel,
    features: Vec<Resolved<'p>>,
    pub(crate) target: &'p [f64],
}

impl BoundSpec<'_> {
    pub(crate) fn width(&self) -> usize {
        self.features.len()
    }

    /// Regressor values at `(d, h)`. The caller guarantees `d >= reach`.
    pub(crate) fn row_into(&self, d: usize, h: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.features.iter().map(|f| self.value(f, d, h)));
    }

    fn value(&self, f: &Resolved<'_>, d: usize, h: usize) -> f64 {
        match *f {
            Resolved::Hourly { s, lag, hour } => s[24 * (d - lag) + hour.unwrap_or(h)],
            Resolved::Cutoff { s, lag } => {
                let back = lag + realized_shift(h) - 1;
                s[24 * (d - back) + h]
            }
            Resolved::Sum(ref series) => series.iter().map(|s| s[24 * d + h]).sum(),
            Resolved::Daily { s, lag, stat } => {
                let day = &s[24 * (d - lag)..24 * (d - lag + 1)];
                match stat {
                    Stat::Max => day.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    Stat::Min => day.iter().copied().fold(f64::INFINITY, f64::min),
                    Stat::Mean => day.iter().sum::<f64>() / 24.0,
                }
            }
            Resolved::Weekday(k) => {
                let wd = self.panel.weekday(24 * d).num_days_from_monday();
                if wd == u32::from(k) {
                    1.0
                } else {
                    0.0
                }
            }
            Resolved::Season(k) => {
                let angle = 2.0 * PI * f64::from(self.panel.day_of_year(24 * d)) / 365.25;
                let harmonic = f64::from(k / 2 + 1);
                if k % 2 == 0 {
                    (harmonic * angle).sin()
                } else {
                    (harmonic * angle).cos()
                }
            }
        }
    }
}
