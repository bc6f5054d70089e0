//! CSV ingestion and export of hourly panels.
//!
//! Every file has a header row and a `ts` column holding ISO-8601
//! timestamps. Timestamps with an offset are converted to UTC; naive ones
//! are taken as UTC. Rows that collapse onto the same UTC hour (clock
//! changes) are averaged. A JSON schema binds file columns to series keys.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, Timelike, Utc};
use serde::{Deserialize, Serialize};

use super::{DataError, HourlyPanel, SeriesKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    #[default]
    Hourly,
    /// One row per day, broadcast to the 24 hours of that UTC date.
    Daily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillPolicy {
    #[default]
    Reject,
    PreviousHour,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnBinding {
    pub column: String,
    pub series: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileBinding {
    /// Logical group name (`capacities`, `generation`, `forecasts`, `fuels`,
    /// `prices`, `flows`, ...).
    pub name: String,
    /// Default location, relative to the schema file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub resolution: Resolution,
    pub columns: Vec<ColumnBinding>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PanelSchema {
    pub files: Vec<FileBinding>,
    /// Per-series fill policy, keyed by series key text.
    #[serde(default)]
    pub fill: BTreeMap<String, FillPolicy>,
    #[serde(default)]
    pub default_fill: FillPolicy,
}

impl PanelSchema {
    pub fn from_json(text: &str) -> Result<Self, DataError> {
        serde_json::from_str(text).map_err(|e| DataError::SchemaMismatch(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        PanelSchema::from_json(&text)
    }

    /// Path map from each binding's `path`, resolved against `base`.
    pub fn default_paths(&self, base: &Path) -> BTreeMap<String, PathBuf> {
        self.files
            .iter()
            .filter_map(|f| f.path.as_ref().map(|p| (f.name.clone(), base.join(p))))
            .collect()
    }

    fn policy(&self, key: &str) -> FillPolicy {
        self.fill.get(key).copied().unwrap_or(self.default_fill)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesCoverage {
    pub series: String,
    pub present: usize,
    pub filled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadReport {
    /// Data rows read per logical file.
    pub rows: BTreeMap<String, usize>,
    pub hours: usize,
    pub coverage: Vec<SeriesCoverage>,
    /// Every (series, hour) that was filled from the previous hour.
    pub filled: Vec<(String, DateTime<Utc>)>,
}

#[derive(Debug, Clone)]
pub struct LoadedPanel {
    pub panel: HourlyPanel,
    pub report: LoadReport,
}

fn parse_ts(raw: &str) -> Option<(DateTime<Utc>, bool)> {
    let s = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some((dt.with_timezone(&Utc), false));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(ndt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some((ndt.and_utc(), false));
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| (d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc(), true))
}

fn parse_value(raw: &str) -> Result<Option<f64>, ()> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| ())
}

/// Raw per-series observations keyed by UTC hour, with duplicate hours
/// averaged.
struct RawSeries {
    key: SeriesKey,
    by_hour: BTreeMap<DateTime<Utc>, (f64, u32)>,
    daily: bool,
}

fn read_file(
    binding: &FileBinding,
    path: &Path,
    out: &mut Vec<RawSeries>,
) -> Result<usize, DataError> {
    let ctx = path.display().to_string();
    if !path.exists() {
        return Err(DataError::SchemaMismatch(format!(
            "file {} for group {} not found",
            ctx, binding.name
        )));
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| DataError::Parse {
        path: ctx.clone(),
        message: e.to_string(),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| DataError::Parse {
            path: ctx.clone(),
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let ts_col = col("ts").ok_or_else(|| {
        DataError::SchemaMismatch(format!("{ctx}: missing timestamp column `ts`"))
    })?;
    let mut targets = Vec::with_capacity(binding.columns.len());
    for cb in &binding.columns {
        let idx = col(&cb.column).ok_or_else(|| {
            DataError::SchemaMismatch(format!("{ctx}: missing declared column {}", cb.column))
        })?;
        let key: SeriesKey = cb.series.parse()?;
        targets.push((idx, out.len()));
        out.push(RawSeries {
            key,
            by_hour: BTreeMap::new(),
            daily: binding.resolution == Resolution::Daily,
        });
    }
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Parse {
            path: ctx.clone(),
            message: e.to_string(),
        })?;
        rows += 1;
        let raw_ts = record.get(ts_col).unwrap_or("");
        let (ts, _) = parse_ts(raw_ts).ok_or_else(|| {
            DataError::SchemaMismatch(format!("{ctx}: unparsable timestamp {raw_ts:?}"))
        })?;
        let ts = match binding.resolution {
            Resolution::Hourly => {
                if ts.minute() != 0 || ts.second() != 0 {
                    return Err(DataError::SchemaMismatch(format!(
                        "{ctx}: timestamp {raw_ts} is not on the hour"
                    )));
                }
                ts
            }
            Resolution::Daily => ts
                .date_naive()
                .and_hms_opt(0, 0, 0)
                .expect("midnight exists")
                .and_utc(),
        };
        for &(idx, slot) in &targets {
            let cell = record.get(idx).unwrap_or("");
            let value = parse_value(cell).map_err(|_| {
                DataError::SchemaMismatch(format!(
                    "{ctx}: column {} has non-numeric value {cell:?} at {raw_ts}",
                    headers.get(idx).unwrap_or("?")
                ))
            })?;
            if let Some(v) = value {
                let entry = out[slot].by_hour.entry(ts).or_insert((0.0, 0));
                entry.0 += v;
                entry.1 += 1;
            }
        }
    }
    Ok(rows)
}

/// Load, align and validate a panel from CSV files.
pub fn load_panel(
    paths: &BTreeMap<String, PathBuf>,
    schema: &PanelSchema,
) -> Result<LoadedPanel, DataError> {
    let mut raw = Vec::new();
    let mut rows = BTreeMap::new();
    for binding in &schema.files {
        let path = paths.get(&binding.name).ok_or_else(|| {
            DataError::SchemaMismatch(format!("no path given for file group {}", binding.name))
        })?;
        rows.insert(binding.name.clone(), read_file(binding, path, &mut raw)?);
    }
    let hourly_extent = raw
        .iter()
        .filter(|r| !r.daily)
        .flat_map(|r| r.by_hour.keys().copied())
        .fold(None, |acc: Option<(DateTime<Utc>, DateTime<Utc>)>, ts| match acc {
            None => Some((ts, ts)),
            Some((lo, hi)) => Some((lo.min(ts), hi.max(ts))),
        });
    let (first, last) = hourly_extent
        .ok_or_else(|| DataError::SchemaMismatch("no hourly observations in any file".into()))?;
    let n = ((last - first).num_hours() + 1) as usize;
    let index: Vec<DateTime<Utc>> = (0..n).map(|h| first + Duration::hours(h as i64)).collect();

    let mut series = BTreeMap::new();
    let mut coverage = Vec::new();
    let mut filled = Vec::new();
    for r in raw {
        let name = r.key.to_string();
        if series.contains_key(&r.key) {
            return Err(DataError::SchemaMismatch(format!("series {name} bound twice")));
        }
        let policy = schema.policy(&name);
        let mut values = Vec::with_capacity(n);
        let mut present = 0;
        let mut n_filled = 0;
        for &ts in &index {
            let lookup = if r.daily {
                ts.date_naive().and_hms_opt(0, 0, 0).expect("midnight exists").and_utc()
            } else {
                ts
            };
            match r.by_hour.get(&lookup) {
                Some(&(sum, count)) => {
                    present += 1;
                    values.push(sum / f64::from(count));
                }
                None => match (policy, values.last().copied()) {
                    (FillPolicy::PreviousHour, Some(prev)) => {
                        n_filled += 1;
                        filled.push((name.clone(), ts));
                        values.push(prev);
                    }
                    _ => return Err(DataError::GapError { ts, series: name }),
                },
            }
        }
        coverage.push(SeriesCoverage {
            series: name,
            present,
            filled: n_filled,
        });
        series.insert(r.key, values);
    }
    let panel = HourlyPanel::new(index, series)?;
    Ok(LoadedPanel {
        report: LoadReport {
            rows,
            hours: panel.len(),
            coverage,
            filled,
        },
        panel,
    })
}

fn group_of(key: &SeriesKey) -> &'static str {
    match key {
        SeriesKey::Capacity(_) => "capacities",
        SeriesKey::Generation(_) | SeriesKey::Hydro => "generation",
        SeriesKey::LoadActual
        | SeriesKey::LoadDa
        | SeriesKey::ResDa(_)
        | SeriesKey::ZoneLoadDa(_)
        | SeriesKey::ZoneResDa(_) => "forecasts",
        SeriesKey::FuelPrice(_) | SeriesKey::Eua => "fuels",
        SeriesKey::Price => "prices",
        SeriesKey::NetImport => "flows",
    }
}

/// Write a panel as one hourly CSV per logical group plus `schema.json`
/// into `dir`. Values use the shortest round-trip decimal form, so
/// [`load_panel`] reproduces the panel exactly.
pub fn write_panel(panel: &HourlyPanel, dir: &Path) -> Result<PanelSchema, DataError> {
    let io_err = |path: &Path| {
        let p = path.display().to_string();
        move |source| DataError::Io { path: p, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut groups: BTreeMap<&str, Vec<(&SeriesKey, &Vec<f64>)>> = BTreeMap::new();
    for (key, values) in panel.series() {
        groups.entry(group_of(key)).or_default().push((key, values));
    }
    let mut schema = PanelSchema::default();
    for (name, members) in groups {
        let file = format!("{name}.csv");
        let path = dir.join(&file);
        let mut w = csv::Writer::from_path(&path).map_err(|e| DataError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let csv_err = |e: csv::Error| DataError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut header = vec!["ts".to_string()];
        header.extend(members.iter().map(|(k, _)| k.to_string()));
        w.write_record(&header).map_err(csv_err)?;
        for t in 0..panel.len() {
            let mut row = Vec::with_capacity(members.len() + 1);
            row.push(panel.ts(t).to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
            row.extend(members.iter().map(|(_, v)| v[t].to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(io_err(&path))?;
        schema.files.push(FileBinding {
            name: name.to_string(),
            path: Some(PathBuf::from(file)),
            resolution: Resolution::Hourly,
            columns: members
                .iter()
                .map(|(k, _)| ColumnBinding {
                    column: k.to_string(),
                    series: k.to_string(),
                })
                .collect(),
        });
    }
    let schema_path = dir.join("schema.json");
    fs::write(
        &schema_path,
        serde_json::to_string_pretty(&schema).expect("schema serializes"),
    )
    .map_err(io_err(&schema_path))?;
    Ok(schema)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write as _;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn schema(fill: Option<FillPolicy>) -> PanelSchema {
        let mut s = PanelSchema {
            files: vec![
                FileBinding {
                    name: "prices".into(),
                    path: None,
                    resolution: Resolution::Hourly,
                    columns: vec![
                        ColumnBinding {
                            column: "price".into(),
                            series: "price".into(),
                        },
                        ColumnBinding {
                            column: "load".into(),
                            series: "load_actual".into(),
                        },
                    ],
                },
                FileBinding {
                    name: "fuels".into(),
                    path: None,
                    resolution: Resolution::Daily,
                    columns: vec![ColumnBinding {
                        column: "gas".into(),
                        series: "fuel.gas".into(),
                    }],
                },
            ],
            ..Default::default()
        };
        if let Some(f) = fill {
            s.fill.insert("price".into(), f);
            s.fill.insert("load_actual".into(), f);
        }
        s
    }

    fn fixture(dir: &Path, skip: Option<usize>, bad_price: Option<usize>) -> BTreeMap<String, PathBuf> {
        let mut prices = String::from("ts,price,load\n");
        for h in 0..48 {
            if Some(h) == skip {
                continue;
            }
            let price = if Some(h) == bad_price { 5000.0 } else { 40.0 + h as f64 };
            let ts = Utc.with_ymd_and_hms(2023, 3, 1, 0, 0, 0).unwrap() + Duration::hours(h as i64);
            writeln!(prices, "{},{price},{}", ts.to_rfc3339(), 50_000 + h).unwrap();
        }
        let fuels = "ts,gas\n2023-03-01,35.5\n2023-03-02,36.25\n";
        let mut paths = BTreeMap::new();
        paths.insert("prices".to_string(), write(dir, "prices.csv", &prices));
        paths.insert("fuels".to_string(), write(dir, "fuels.csv", fuels));
        paths
    }

    use chrono::TimeZone;

    #[test]
    fn well_formed_fixture_loads() {
        let dir = tempfile::tempdir().unwrap();
        let paths = fixture(dir.path(), None, None);
        let loaded = load_panel(&paths, &schema(None)).unwrap();
        assert_eq!(loaded.panel.len(), 48);
        assert!(loaded.report.filled.is_empty());
        let gas = loaded.panel.get(&SeriesKey::FuelPrice(crate::market_data::Fuel::Gas)).unwrap();
        assert_eq!(gas[0], 35.5);
        assert_eq!(gas[23], 35.5);
        assert_eq!(gas[24], 36.25);
        assert_eq!(loaded.report.rows["prices"], 48);
    }

    #[test]
    fn missing_hour_with_fill_policy() {
        let dir = tempfile::tempdir().unwrap();
        let paths = fixture(dir.path(), Some(10), None);
        let loaded = load_panel(&paths, &schema(Some(FillPolicy::PreviousHour))).unwrap();
        assert_eq!(loaded.panel.len(), 48);
        let price_fills: Vec<_> =
            loaded.report.filled.iter().filter(|(s, _)| s == "price").collect();
        assert_eq!(price_fills.len(), 1);
        let p = loaded.panel.get(&SeriesKey::Price).unwrap();
        assert_eq!(p[10], p[9]);
    }

    #[test]
    fn missing_hour_rejected_by_default() {
        let dir = tempfile::tempdir().unwrap();
        let paths = fixture(dir.path(), Some(10), None);
        match load_panel(&paths, &schema(None)) {
            Err(DataError::GapError { ts, .. }) => {
                assert_eq!(ts, Utc.with_ymd_and_hms(2023, 3, 1, 10, 0, 0).unwrap())
            }
            other => panic!("expected gap error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_price() {
        let dir = tempfile::tempdir().unwrap();
        let paths = fixture(dir.path(), None, Some(5));
        match load_panel(&paths, &schema(None)) {
            Err(DataError::RangeError { ts, value, .. }) => {
                assert_eq!(ts, Utc.with_ymd_and_hms(2023, 3, 1, 5, 0, 0).unwrap());
                assert_eq!(value, 5000.0);
            }
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_and_file() {
        let dir = tempfile::tempdir().unwrap();
        let paths = fixture(dir.path(), None, None);
        let mut s = schema(None);
        s.files[0].columns[0].column = "nope".into();
        assert!(matches!(load_panel(&paths, &s), Err(DataError::SchemaMismatch(_))));

        let mut paths = paths;
        paths.insert("prices".into(), dir.path().join("absent.csv"));
        assert!(matches!(load_panel(&paths, &schema(None)), Err(DataError::SchemaMismatch(_))));
    }

    #[test]
    fn offsets_are_converted_and_duplicates_averaged() {
        let dir = tempfile::tempdir().unwrap();
        // 02:00+01:00 and 01:00Z are the same UTC hour.
        let body = "ts,price,load\n2023-10-29T00:00:00Z,10,1\n2023-10-29T02:00:00+01:00,20,1\n2023-10-29T01:00:00Z,30,1\n2023-10-29T02:00:00Z,40,1\n";
        let mut paths = BTreeMap::new();
        paths.insert("prices".to_string(), write(dir.path(), "p.csv", body));
        let mut s = schema(None);
        s.files.truncate(1);
        let loaded = load_panel(&paths, &s).unwrap();
        assert_eq!(loaded.panel.get(&SeriesKey::Price).unwrap(), &[10.0, 25.0, 40.0]);
    }
}
