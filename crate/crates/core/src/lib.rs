//! Data-driven merit-order model for day-ahead electricity prices.
//!
//! The supply curve of each hour is built from per-technology linear cost
//! stacks whose efficiencies, renewable bids, capacity corrections,
//! must-run shares and gas split are estimated from data by minimizing
//! the training mean absolute error. The crate also contains the input
//! forecasters and benchmark price models, and the evaluation metrics.

pub mod estimation;
pub mod evaluation;
pub mod forecasters;
pub mod marginal_costs;
pub mod market_data;
pub mod merit_curve;
pub mod run;
pub mod stack_assembly;

pub use market_data::{HourlyPanel, PlantCatalog, SeriesKey};
pub use merit_curve::{PiecewiseCurve, PlantStack};
pub use run::ForecastRun;
pub use stack_assembly::{MeritOrderModel, Mode, ParamGroup, ParameterSet};
