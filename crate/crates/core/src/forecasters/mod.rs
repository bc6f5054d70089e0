//! Input forecasts for hydro and net import, and the naive and expert
//! price benchmarks.
//!
//! All models work on a day-aligned panel and address hours as
//! `(day, hour-of-day)`, with hour `t = 24 * day + hour`.

mod features;
mod lasso;

use std::ops::Range;

use chrono::Weekday;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use features::{realized_shift, Feature, LinearSpec, TargetTiming, AVAILABLE_HOURS};
pub use lasso::{lasso_fit, lasso_path, LambdaGrid, LassoConfig, LassoFit, LassoPath, PathPoint, Standardization};

use crate::market_data::{DataError, HourlyPanel, PlantCatalog, SeriesKey};
use crate::run::ForecastRun;

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("forecast for day {day} needs at least {needed} days of history")]
    InsufficientHistory { day: usize, needed: usize },
    #[error("every feature column is constant")]
    DegenerateDesign,
    #[error("at least 2 observations are needed, got {0}")]
    TooFewObservations(usize),
    #[error("column has {got} rows, target has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("missing series {0}")]
    MissingSeries(String),
    #[error("day {day} is outside the panel ({days} days)")]
    DayOutOfRange { day: usize, days: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// A linear model refit for every forecast day on a rolling window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearForecaster {
    pub spec: LinearSpec,
    /// Most recent training days used per fit.
    pub window_days: usize,
    #[serde(default)]
    pub grid: LambdaGrid,
    #[serde(default)]
    pub lasso: LassoConfig,
}

/// Fitted submodels for one forecast day, as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedDay {
    pub model: String,
    pub day: usize,
    pub window_days: usize,
    pub features: Vec<String>,
    /// One fit per hour of day, or a single pooled fit.
    pub fits: Vec<LassoFit>,
}

impl LinearForecaster {
    pub fn new(spec: LinearSpec) -> Self {
        LinearForecaster {
            spec,
            window_days: 365,
            grid: LambdaGrid::default(),
            lasso: LassoConfig::default(),
        }
    }

    pub fn with_window(mut self, days: usize) -> Self {
        self.window_days = days.max(1);
        self
    }

    /// Training days for hour `h` of forecast day `d`.
    fn training_days(&self, d: usize, h: usize) -> Range<usize> {
        let first = self.spec.reach();
        let end = self.spec.timing.last_known_day(d, h).map_or(0, |l| l + 1);
        end.saturating_sub(self.window_days).max(first)..end.max(first)
    }

    fn check_day(&self, panel: &HourlyPanel, d: usize) -> Result<(), ForecastError> {
        if d >= panel.days() {
            return Err(ForecastError::DayOutOfRange { day: d, days: panel.days() });
        }
        let needed = self.spec.reach() + 3;
        if d < needed {
            return Err(ForecastError::InsufficientHistory { day: d, needed });
        }
        Ok(())
    }

    fn fit_rows(&self, bound: &features::BoundSpec<'_>, d: usize, hours: &[usize]) -> Result<LassoFit, ForecastError> {
        let width = bound.width();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); width];
        let mut y = Vec::new();
        let mut row = Vec::with_capacity(width);
        for &h in hours {
            for day in self.training_days(d, h) {
                bound.row_into(day, h, &mut row);
                for (c, v) in columns.iter_mut().zip(&row) {
                    c.push(*v);
                }
                y.push(bound.target[24 * day + h]);
            }
        }
        if y.len() < 2 {
            return Err(ForecastError::InsufficientHistory {
                day: d,
                needed: self.spec.reach() + 3,
            });
        }
        match lasso_fit(&columns, &y, &self.grid, &self.lasso) {
            Err(ForecastError::DegenerateDesign) => {
                Ok(LassoFit::constant(y.iter().sum::<f64>() / y.len() as f64, width))
            }
            other => other,
        }
    }

    /// Fit the submodels used to forecast day `d`.
    pub fn fit_day(&self, panel: &HourlyPanel, d: usize) -> Result<FittedDay, ForecastError> {
        self.check_day(panel, d)?;
        let bound = self.spec.bind(panel)?;
        let fits = if self.spec.per_hour {
            (0..24)
                .into_par_iter()
                .map(|h| self.fit_rows(&bound, d, &[h]))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            let all: Vec<usize> = (0..24).collect();
            vec![self.fit_rows(&bound, d, &all)?]
        };
        Ok(FittedDay {
            model: self.spec.name.clone(),
            day: d,
            window_days: self.window_days,
            features: self.spec.labels(),
            fits,
        })
    }

    pub fn forecast_hour(&self, panel: &HourlyPanel, d: usize, h: usize) -> Result<f64, ForecastError> {
        assert!(h < 24, "hour of day out of range");
        self.check_day(panel, d)?;
        let bound = self.spec.bind(panel)?;
        let hours: Vec<usize> = if self.spec.per_hour { vec![h] } else { (0..24).collect() };
        let fit = self.fit_rows(&bound, d, &hours)?;
        let mut row = Vec::new();
        bound.row_into(d, h % 24, &mut row);
        Ok(fit.predict(&row))
    }

    pub fn forecast_day(&self, panel: &HourlyPanel, d: usize) -> Result<Vec<f64>, ForecastError> {
        let fitted = self.fit_day(panel, d)?;
        let bound = self.spec.bind(panel)?;
        let mut row = Vec::new();
        Ok((0..24)
            .map(|h| {
                bound.row_into(d, h, &mut row);
                fitted.fits[if self.spec.per_hour { h } else { 0 }].predict(&row)
            })
            .collect())
    }

    /// Hourly forecasts for every day in `days`, refitting each day.
    pub fn forecast_days(&self, panel: &HourlyPanel, days: Range<usize>) -> Result<Vec<f64>, ForecastError> {
        let per_day = days
            .into_par_iter()
            .map(|d| self.forecast_day(panel, d))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(per_day.concat())
    }

    /// A full-length series with observed values before day `from` and
    /// forecasts from `from` to the end of the panel.
    pub fn forecast_series(&self, panel: &HourlyPanel, from: usize) -> Result<Vec<f64>, ForecastError> {
        let observed = panel
            .get(&self.spec.target)
            .ok_or_else(|| ForecastError::MissingSeries(self.spec.target.to_string()))?;
        let mut out = observed[..24 * from].to_vec();
        out.extend(self.forecast_days(panel, from..panel.days())?);
        Ok(out)
    }
}

/// Same hour one week back on Monday, Saturday and Sunday, the previous day otherwise.
pub fn naive_price(panel: &HourlyPanel, d: usize, h: usize) -> Result<f64, ForecastError> {
    assert!(h < 24, "hour of day out of range");
    panel.require_day_aligned()?;
    if d >= panel.days() {
        return Err(ForecastError::DayOutOfRange { day: d, days: panel.days() });
    }
    if d < 7 {
        return Err(ForecastError::InsufficientHistory { day: d, needed: 7 });
    }
    let price = panel.get(&SeriesKey::Price).ok_or_else(|| ForecastError::MissingSeries("price".into()))?;
    let back = match panel.weekday(24 * d) {
        Weekday::Mon | Weekday::Sat | Weekday::Sun => 7,
        _ => 1,
    };
    Ok(price[24 * (d - back) + h])
}

pub fn hydro_forecast(panel: &HourlyPanel, d: usize, h: usize) -> Result<f64, ForecastError> {
    LinearForecaster::new(LinearSpec::hydro()).forecast_hour(panel, d, h)
}

pub fn net_import_forecast(panel: &HourlyPanel, catalog: &PlantCatalog, d: usize, h: usize) -> Result<f64, ForecastError> {
    LinearForecaster::new(LinearSpec::net_import(panel, catalog)).forecast_hour(panel, d, h)
}

pub fn expert_price(panel: &HourlyPanel, d: usize, h: usize) -> Result<f64, ForecastError> {
    LinearForecaster::new(LinearSpec::expert(panel)).forecast_hour(panel, d, h)
}

/// The benchmark and input-forecast models runnable over a day range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Naive,
    Expert,
    Hydro,
    NetImport,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [Benchmark::Naive, Benchmark::Expert, Benchmark::Hydro, Benchmark::NetImport];

    pub fn as_str(self) -> &'static str {
        match self {
            Benchmark::Naive => "naive",
            Benchmark::Expert => "expert",
            Benchmark::Hydro => "hydro",
            Benchmark::NetImport => "net_import",
        }
    }

    pub fn target(self) -> SeriesKey {
        match self {
            Benchmark::Naive | Benchmark::Expert => SeriesKey::Price,
            Benchmark::Hydro => SeriesKey::Hydro,
            Benchmark::NetImport => SeriesKey::NetImport,
        }
    }

    pub fn forecaster(self, panel: &HourlyPanel, catalog: &PlantCatalog, window_days: usize) -> Option<LinearForecaster> {
        let spec = match self {
            Benchmark::Naive => return None,
            Benchmark::Expert => LinearSpec::expert(panel),
            Benchmark::Hydro => LinearSpec::hydro(),
            Benchmark::NetImport => LinearSpec::net_import(panel, catalog),
        };
        Some(LinearForecaster::new(spec).with_window(window_days))
    }

    /// Forecast every hour of `days`, with the observed target as actuals.
    pub fn run(
        self,
        panel: &HourlyPanel,
        catalog: &PlantCatalog,
        days: Range<usize>,
        window_days: usize,
    ) -> Result<ForecastRun, ForecastError> {
        let predicted = match self.forecaster(panel, catalog, window_days) {
            Some(f) => f.forecast_days(panel, days.clone())?,
            None => days
                .clone()
                .flat_map(|d| (0..24).map(move |h| (d, h)))
                .map(|(d, h)| naive_price(panel, d, h))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let hours = 24 * days.start..24 * days.end;
        let actual = panel.get(&self.target()).map(|s| s[hours.clone()].to_vec());
        let index = panel.index()[hours].to_vec();
        Ok(ForecastRun::new(self.as_str(), index, predicted, actual))
    }
}

impl std::str::FromStr for Benchmark {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| format!("unknown benchmark {s:?} (naive, expert, hydro, net_import)"))
    }
}
