//! Hourly fundamental data: plant catalog, aligned panel, CSV ingestion and
//! the synthetic market generator used as a ground-truth fixture.

mod catalog;
mod io;
mod panel;
mod synth;

use chrono::{DateTime, Utc};
use thiserror::Error;

pub use catalog::{Fuel, PlantCatalog, PlantKind, PlantRole, PlantType, VolumeSource};
pub use io::{
    load_panel, write_panel, ColumnBinding, FileBinding, FillPolicy, LoadReport, LoadedPanel,
    PanelSchema, Resolution, SeriesCoverage,
};
pub use panel::{split_train_test, HourlyPanel, SeriesKey, PRICE_CAP, PRICE_FLOOR};
pub use synth::{synthesize_market, SeriesProfile, Shape, SynthSpec, SyntheticMarket, WalkSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("gap in hourly index at {ts} (series {series})")]
    GapError { ts: DateTime<Utc>, series: String },
    #[error("value {value} of {series} at {ts} outside its admissible range")]
    RangeError {
        ts: DateTime<Utc>,
        series: String,
        value: f64,
    },
    #[error("cut {0} is not strictly inside the panel index")]
    CutOutOfRange(DateTime<Utc>),
    #[error("infeasible synthetic market: {0}")]
    InfeasibleSpec(String),
    #[error("missing series {0}")]
    MissingSeries(String),
    #[error("unknown fuel {0}")]
    UnknownFuel(String),
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
    #[error("series {series} has {got} values, index has {expected}")]
    LengthMismatch {
        series: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid index: {0}")]
    InvalidIndex(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}
