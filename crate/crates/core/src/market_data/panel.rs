use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, Timelike, Utc, Weekday};

use super::{DataError, Fuel};

/// Lower end of the admissible clearing-price interval, EUR/MWh.
pub const PRICE_FLOOR: f64 = -500.0;
/// Upper end of the admissible clearing-price interval, EUR/MWh.
pub const PRICE_CAP: f64 = 3000.0;

/// Name of one hourly series in a panel.
///
/// Text form: `capacity.<plant>`, `generation.<plant>`, `res_da.<plant>`,
/// `load_actual`, `load_da`, `fuel.<fuel>`, `eua`, `price`, `net_import`,
/// `hydro`, `zone.<zone>.load_da`, `zone.<zone>.res_da`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SeriesKey {
    Capacity(String),
    Generation(String),
    ResDa(String),
    LoadActual,
    LoadDa,
    FuelPrice(Fuel),
    Eua,
    Price,
    NetImport,
    Hydro,
    ZoneLoadDa(String),
    ZoneResDa(String),
}

impl SeriesKey {
    /// Admissible range checked on load.
    fn range(&self) -> (f64, f64) {
        match self {
            SeriesKey::Price => (PRICE_FLOOR, PRICE_CAP),
            SeriesKey::Capacity(_) | SeriesKey::FuelPrice(_) | SeriesKey::Eua => {
                (0.0, f64::INFINITY)
            }
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Whether the series is a day-ahead forecast (published before the
    /// delivery day) rather than a realized outcome.
    pub fn is_day_ahead(&self) -> bool {
        matches!(
            self,
            SeriesKey::LoadDa | SeriesKey::ResDa(_) | SeriesKey::ZoneLoadDa(_) | SeriesKey::ZoneResDa(_)
        )
    }
}

impl fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesKey::Capacity(p) => write!(f, "capacity.{p}"),
            SeriesKey::Generation(p) => write!(f, "generation.{p}"),
            SeriesKey::ResDa(p) => write!(f, "res_da.{p}"),
            SeriesKey::LoadActual => f.write_str("load_actual"),
            SeriesKey::LoadDa => f.write_str("load_da"),
            SeriesKey::FuelPrice(fuel) => write!(f, "fuel.{fuel}"),
            SeriesKey::Eua => f.write_str("eua"),
            SeriesKey::Price => f.write_str("price"),
            SeriesKey::NetImport => f.write_str("net_import"),
            SeriesKey::Hydro => f.write_str("hydro"),
            SeriesKey::ZoneLoadDa(z) => write!(f, "zone.{z}.load_da"),
            SeriesKey::ZoneResDa(z) => write!(f, "zone.{z}.res_da"),
        }
    }
}

impl FromStr for SeriesKey {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DataError::SchemaMismatch(format!("unknown series key {s:?}"));
        let key = match s {
            "load_actual" => SeriesKey::LoadActual,
            "load_da" => SeriesKey::LoadDa,
            "eua" => SeriesKey::Eua,
            "price" => SeriesKey::Price,
            "net_import" => SeriesKey::NetImport,
            "hydro" => SeriesKey::Hydro,
            _ => {
                let (head, rest) = s.split_once('.').ok_or_else(bad)?;
                if rest.is_empty() {
                    return Err(bad());
                }
                match head {
                    "capacity" => SeriesKey::Capacity(rest.to_string()),
                    "generation" => SeriesKey::Generation(rest.to_string()),
                    "res_da" => SeriesKey::ResDa(rest.to_string()),
                    "fuel" => SeriesKey::FuelPrice(rest.parse()?),
                    "zone" => match rest.rsplit_once('.') {
                        Some((zone, "load_da")) if !zone.is_empty() => {
                            SeriesKey::ZoneLoadDa(zone.to_string())
                        }
                        Some((zone, "res_da")) if !zone.is_empty() => {
                            SeriesKey::ZoneResDa(zone.to_string())
                        }
                        _ => return Err(bad()),
                    },
                    _ => return Err(bad()),
                }
            }
        };
        Ok(key)
    }
}

impl serde::Serialize for SeriesKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for SeriesKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Aligned hourly time series on a gap-free UTC index.
///
/// Immutable after construction apart from [`HourlyPanel::set_series`],
/// which only checks lengths (tests use it to inject sentinels).
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyPanel {
    index: Vec<DateTime<Utc>>,
    series: BTreeMap<SeriesKey, Vec<f64>>,
}

impl HourlyPanel {
    pub fn new(
        index: Vec<DateTime<Utc>>,
        series: BTreeMap<SeriesKey, Vec<f64>>,
    ) -> Result<Self, DataError> {
        if index.is_empty() {
            return Err(DataError::InvalidIndex("empty index".into()));
        }
        for w in index.windows(2) {
            if w[1] - w[0] != Duration::hours(1) {
                return Err(DataError::GapError {
                    ts: w[0] + Duration::hours(1),
                    series: "ts".into(),
                });
            }
        }
        if index[0].minute() != 0 || index[0].second() != 0 || index[0].nanosecond() != 0 {
            return Err(DataError::InvalidIndex(format!("{} is not on the hour", index[0])));
        }
        let panel = HourlyPanel { index, series };
        for (key, values) in &panel.series {
            panel.check_length(key, values)?;
            let (lo, hi) = key.range();
            for (t, &v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DataError::GapError {
                        ts: panel.index[t],
                        series: key.to_string(),
                    });
                }
                if v < lo || v > hi {
                    return Err(DataError::RangeError {
                        ts: panel.index[t],
                        series: key.to_string(),
                        value: v,
                    });
                }
            }
        }
        Ok(panel)
    }

    fn check_length(&self, key: &SeriesKey, values: &[f64]) -> Result<(), DataError> {
        if values.len() != self.index.len() {
            return Err(DataError::LengthMismatch {
                series: key.to_string(),
                expected: self.index.len(),
                got: values.len(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn index(&self) -> &[DateTime<Utc>] {
        &self.index
    }

    pub fn ts(&self, t: usize) -> DateTime<Utc> {
        self.index[t]
    }

    pub fn series(&self) -> &BTreeMap<SeriesKey, Vec<f64>> {
        &self.series
    }

    pub fn get(&self, key: &SeriesKey) -> Option<&[f64]> {
        self.series.get(key).map(Vec::as_slice)
    }

    pub fn require(&self, key: &SeriesKey) -> Result<&[f64], DataError> {
        self.get(key).ok_or_else(|| DataError::MissingSeries(key.to_string()))
    }

    /// Replace or add a series without range validation.
    pub fn set_series(&mut self, key: SeriesKey, values: Vec<f64>) -> Result<(), DataError> {
        self.check_length(&key, &values)?;
        self.series.insert(key, values);
        Ok(())
    }

    /// Position of a timestamp in the index.
    pub fn position(&self, ts: DateTime<Utc>) -> Option<usize> {
        let first = self.index[0];
        let offset = ts - first;
        if offset < Duration::zero() || offset.num_seconds() % 3600 != 0 {
            return None;
        }
        let t = offset.num_hours() as usize;
        (t < self.len()).then_some(t)
    }

    /// Contiguous sub-panel over `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> HourlyPanel {
        HourlyPanel {
            index: self.index[range.clone()].to_vec(),
            series: self
                .series
                .iter()
                .map(|(k, v)| (k.clone(), v[range.clone()].to_vec()))
                .collect(),
        }
    }

    /// Whether the first hour is midnight UTC, so that hour `t` is
    /// `(t / 24, t % 24)` in (day, hour-of-day) terms.
    pub fn is_day_aligned(&self) -> bool {
        self.index[0].hour() == 0
    }

    pub fn require_day_aligned(&self) -> Result<(), DataError> {
        if self.is_day_aligned() {
            Ok(())
        } else {
            Err(DataError::InvalidIndex(format!(
                "panel starts at {}, day-based models need a midnight start",
                self.index[0]
            )))
        }
    }

    /// Number of complete days in a day-aligned panel.
    pub fn days(&self) -> usize {
        self.len() / 24
    }

    pub fn weekday(&self, t: usize) -> Weekday {
        self.index[t].weekday()
    }

    /// Day-of-year (1-based) of hour `t`.
    pub fn day_of_year(&self, t: usize) -> u32 {
        self.index[t].ordinal()
    }
}

/// Split at `cut`: the training part ends the hour before `cut`.
pub fn split_train_test(
    panel: &HourlyPanel,
    cut: DateTime<Utc>,
) -> Result<(HourlyPanel, HourlyPanel), DataError> {
    let first = panel.ts(0);
    let last = panel.ts(panel.len() - 1);
    if cut <= first || cut > last {
        return Err(DataError::CutOutOfRange(cut));
    }
    let at = panel.index().partition_point(|&ts| ts < cut);
    Ok((panel.slice(0..at), panel.slice(at..panel.len())))
}
