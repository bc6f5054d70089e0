//! Hourly forecast output shared by every model, with CSV export.

use std::io::{Read, Write};

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
}

/// Per-hour marginal-technology attribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunDecomposition {
    /// Stack ids, one per component column.
    pub technologies: Vec<String>,
    /// At-the-money technology per hour.
    pub atm: Vec<String>,
    /// Component values per hour, aligned with `technologies`.
    pub components: Vec<Vec<f64>>,
}

/// Predicted prices of one model over a horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastRun {
    pub model: String,
    pub index: Vec<DateTime<Utc>>,
    pub predicted: Vec<f64>,
    pub actual: Option<Vec<f64>>,
    pub decomposition: Option<RunDecomposition>,
}

impl ForecastRun {
    pub fn new(
        model: impl Into<String>,
        index: Vec<DateTime<Utc>>,
        predicted: Vec<f64>,
        actual: Option<Vec<f64>>,
    ) -> Self {
        assert_eq!(index.len(), predicted.len(), "one prediction per hour");
        if let Some(a) = &actual {
            assert_eq!(a.len(), predicted.len(), "one actual per hour");
        }
        ForecastRun {
            model: model.into(),
            index,
            predicted,
            actual,
            decomposition: None,
        }
    }

    pub fn with_decomposition(mut self, decomposition: RunDecomposition) -> Self {
        assert_eq!(decomposition.atm.len(), self.predicted.len());
        self.decomposition = Some(decomposition);
        self
    }

    pub fn len(&self) -> usize {
        self.predicted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicted.is_empty()
    }

    /// Columns: `ts, price_pred, price_actual, atm_technology`, then one
    /// `comp.<technology>` column per stack when a decomposition exists.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), RunError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["ts".to_string(), "price_pred".into(), "price_actual".into(), "atm_technology".into()];
        if let Some(d) = &self.decomposition {
            header.extend(d.technologies.iter().map(|t| format!("comp.{t}")));
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![
                self.index[i].to_rfc3339(),
                self.predicted[i].to_string(),
                self.actual.as_ref().map_or_else(String::new, |a| a[i].to_string()),
            ];
            match &self.decomposition {
                Some(d) => {
                    row.push(d.atm[i].clone());
                    row.extend(d.components[i].iter().map(f64::to_string));
                }
                None => row.push(String::new()),
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(model: &str, input: R) -> Result<Self, RunError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let technologies: Vec<String> = header
            .iter()
            .filter_map(|h| h.strip_prefix("comp.").map(str::to_string))
            .collect();
        let mut index = Vec::new();
        let mut predicted = Vec::new();
        let mut actual = Vec::new();
        let mut atm = Vec::new();
        let mut components = Vec::new();
        let mut has_actual = true;
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |message: String| RunError::Parse { row: row + 1, message };
            let field = |i: usize| rec.get(i).unwrap_or("");
            let ts = DateTime::parse_from_rfc3339(field(0))
                .map_err(|e| bad(format!("timestamp: {e}")))?
                .with_timezone(&Utc);
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
            index.push(ts);
            predicted.push(num(field(1))?);
            if field(2).is_empty() {
                has_actual = false;
            } else {
                actual.push(num(field(2))?);
            }
            atm.push(field(3).to_string());
            components.push(
                (0..technologies.len())
                    .map(|k| num(field(4 + k)))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        let actual = (has_actual && !index.is_empty()).then_some(actual);
        let mut run = ForecastRun::new(model, index, predicted, actual);
        if !technologies.is_empty() {
            run = run.with_decomposition(RunDecomposition {
                technologies,
                atm,
                components,
            });
        }
        Ok(run)
    }
}
