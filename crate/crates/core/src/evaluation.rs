//! Forecast error metrics: MAE, skill against the naive benchmark, errors
//! by residual-load vigintile, and error correlations between models.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::market_data::{HourlyPanel, SeriesKey};
use crate::run::ForecastRun;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("series lengths differ: {expected} vs {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("missing series {0}")]
    MissingSeries(String),
    #[error("run {0} has no actual prices")]
    NoActuals(String),
    #[error("runs {0} and {1} cover different hours")]
    IndexMismatch(String, String),
    #[error("hour {0} of a run is not in the panel")]
    HourNotInPanel(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn same_len(a: &[f64], b: &[f64]) -> Result<(), EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub fn mae(pred: &[f64], actual: &[f64]) -> Result<f64, EvalError> {
    same_len(pred, actual)?;
    Ok(pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / pred.len() as f64)
}

/// MAE of a model relative to the naive MAE, in percent; lower is better
/// and the naive model scores exactly 100.
pub fn skill(model_mae: f64, naive_mae: f64) -> f64 {
    100.0 * (model_mae / naive_mae)
}

/// Day-ahead load minus day-ahead renewables for the given hours.
pub fn residual_load(panel: &HourlyPanel, hours: &[usize]) -> Result<Vec<f64>, EvalError> {
    let load = panel
        .get(&SeriesKey::LoadDa)
        .ok_or_else(|| EvalError::MissingSeries("load_da".into()))?;
    let res: Vec<&[f64]> = panel
        .series()
        .iter()
        .filter(|(k, _)| matches!(k, SeriesKey::ResDa(_)))
        .map(|(_, v)| v.as_slice())
        .collect();
    if res.is_empty() {
        return Err(EvalError::MissingSeries("res_da.*".into()));
    }
    Ok(hours
        .iter()
        .map(|&t| load[t] - res.iter().map(|s| s[t]).sum::<f64>())
        .collect())
}

/// Quantile bin of every evaluated hour.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinAssignment {
    pub n_bins: usize,
    /// Bin index (0-based) per hour.
    pub bins: Vec<usize>,
    pub residual_load: Vec<f64>,
}

impl BinAssignment {
    /// An hour's bin is `floor(rank * n_bins / n)`, where its rank counts
    /// the hours with strictly smaller residual load. Tied hours share the
    /// lowest bin their group reaches, so a constant residual load puts
    /// every hour in the first bin.
    pub fn from_values(values: Vec<f64>, n_bins: usize) -> Result<Self, EvalError> {
        if values.is_empty() || n_bins == 0 {
            return Err(EvalError::Empty);
        }
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let mut bins = vec![0; n];
        let mut rank = 0;
        for (pos, &i) in order.iter().enumerate() {
            if pos > 0 && values[i] != values[order[pos - 1]] {
                rank = pos;
            }
            bins[i] = rank * n_bins / n;
        }
        Ok(BinAssignment {
            n_bins,
            bins,
            residual_load: values,
        })
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_bins];
        for &b in &self.bins {
            c[b] += 1;
        }
        c
    }
}

pub fn residual_load_bins(panel: &HourlyPanel, hours: &[usize], n_bins: usize) -> Result<BinAssignment, EvalError> {
    BinAssignment::from_values(residual_load(panel, hours)?, n_bins)
}

/// Positions of a run's hours in the panel.
pub fn run_hours(panel: &HourlyPanel, run: &ForecastRun) -> Result<Vec<usize>, EvalError> {
    run.index
        .iter()
        .map(|&ts| panel.position(ts).ok_or_else(|| EvalError::HourNotInPanel(ts.to_rfc3339())))
        .collect()
}

/// Error summary of one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub model: String,
    pub mae: f64,
    /// Percent of the naive MAE, when a naive reference was given.
    pub skill: Option<f64>,
    /// MAE per residual-load bin; `None` for empty bins.
    pub bin_mae: Vec<Option<f64>>,
    pub bin_counts: Vec<usize>,
    /// MAE over hours with a negative actual price.
    pub negative_mae: Option<f64>,
    pub negative_count: usize,
}

impl MetricReport {
    pub fn compute(run: &ForecastRun, bins: &BinAssignment, naive_mae: Option<f64>) -> Result<Self, EvalError> {
        let actual = run.actual.as_deref().ok_or_else(|| EvalError::NoActuals(run.model.clone()))?;
        let overall = mae(&run.predicted, actual)?;
        if bins.bins.len() != actual.len() {
            return Err(EvalError::LengthMismatch {
                expected: actual.len(),
                got: bins.bins.len(),
            });
        }
        let mut sums = vec![0.0; bins.n_bins];
        let counts = bins.counts();
        let mut neg_sum = 0.0;
        let mut neg_count = 0;
        for (i, (&p, &a)) in run.predicted.iter().zip(actual).enumerate() {
            let e = (p - a).abs();
            sums[bins.bins[i]] += e;
            if a < 0.0 {
                neg_sum += e;
                neg_count += 1;
            }
        }
        Ok(MetricReport {
            model: run.model.clone(),
            mae: overall,
            skill: naive_mae.map(|n| skill(overall, n)),
            bin_mae: sums
                .iter()
                .zip(&counts)
                .map(|(s, &c)| (c > 0).then(|| s / c as f64))
                .collect(),
            bin_counts: counts,
            negative_mae: (neg_count > 0).then(|| neg_sum / neg_count as f64),
            negative_count: neg_count,
        })
    }

    /// Count-weighted mean of the bin MAEs.
    pub fn recombined_mae(&self) -> f64 {
        let n: usize = self.bin_counts.iter().sum();
        self.bin_mae
            .iter()
            .zip(&self.bin_counts)
            .filter_map(|(m, &c)| m.map(|m| m * c as f64))
            .sum::<f64>()
            / n as f64
    }
}

/// Reports for several runs over the same hours, with bins computed on
/// that slice and skill relative to the run named `naive` if present.
pub fn evaluate_runs(panel: &HourlyPanel, runs: &[ForecastRun], n_bins: usize) -> Result<Vec<MetricReport>, EvalError> {
    let first = runs.first().ok_or(EvalError::Empty)?;
    for r in runs {
        if r.index != first.index {
            return Err(EvalError::IndexMismatch(first.model.clone(), r.model.clone()));
        }
    }
    let hours = run_hours(panel, first)?;
    let bins = residual_load_bins(panel, &hours, n_bins)?;
    let naive = match runs.iter().find(|r| r.model == "naive") {
        Some(r) => Some(mae(&r.predicted, r.actual.as_deref().ok_or_else(|| EvalError::NoActuals(r.model.clone()))?)?),
        None => None,
    };
    runs.iter().map(|r| MetricReport::compute(r, &bins, naive)).collect()
}

/// One row per model: `model, mae, skill, bin01..binNN, negative_price`.
pub fn write_reports_csv<W: Write>(reports: &[MetricReport], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    let n_bins = reports.first().map_or(0, |r| r.bin_mae.len());
    let mut header = vec!["model".to_string(), "mae".into(), "skill".into()];
    header.extend((1..=n_bins).map(|b| format!("bin{b:02}")));
    header.push("negative_price".into());
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for r in reports {
        let mut row = vec![r.model.clone(), r.mae.to_string(), opt(r.skill)];
        row.extend(r.bin_mae.iter().map(|m| opt(*m)));
        row.push(opt(r.negative_mae));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text table with one row per residual-load bin and one column per model.
pub fn reports_table(reports: &[MetricReport]) -> String {
    let mut out = String::new();
    let width = reports.iter().map(|r| r.model.len()).max().unwrap_or(0).max(9);
    let _ = write!(out, "{:<14}{:>7}", "residual load", "hours");
    for r in reports {
        let _ = write!(out, " {:>width$}", r.model);
    }
    out.push('\n');
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
    let n_bins = reports.first().map_or(0, |r| r.bin_mae.len());
    for b in 0..n_bins {
        let lo = 100 * b / n_bins;
        let hi = 100 * (b + 1) / n_bins;
        let _ = write!(out, "{:<14}{:>7}", format!("{lo}-{hi}%"), reports[0].bin_counts[b]);
        for r in reports {
            let _ = write!(out, " {:>width$}", cell(r.bin_mae[b]));
        }
        out.push('\n');
    }
    if let Some(first) = reports.first() {
        let _ = write!(out, "{:<14}{:>7}", "price < 0", first.negative_count);
        for r in reports {
            let _ = write!(out, " {:>width$}", cell(r.negative_mae));
        }
        out.push('\n');
        let total: usize = first.bin_counts.iter().sum();
        let _ = write!(out, "{:<14}{:>7}", "all", total);
        for r in reports {
            let _ = write!(out, " {:>width$}", cell(Some(r.mae)));
        }
        out.push('\n');
        if reports.iter().any(|r| r.skill.is_some()) {
            let _ = write!(out, "{:<14}{:>7}", "skill %", "");
            for r in reports {
                let _ = write!(out, " {:>width$}", cell(r.skill));
            }
            out.push('\n');
        }
    }
    out
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    same_len(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Row means of `|v_i - v_j|`, summed in index order so that `v` and
/// `-v` give bitwise identical results.
fn distance_row_means(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    v.par_iter()
        .map(|&x| v.iter().map(|y| (x - y).abs()).sum::<f64>() / n)
        .collect()
}

/// Squared sample distance covariance (biased, V-statistic form).
fn dcov2(x: &[f64], y: &[f64], ax: &[f64], ay: &[f64]) -> f64 {
    let n = x.len() as f64;
    let a_mean = ax.iter().sum::<f64>() / n;
    let b_mean = ay.iter().sum::<f64>() / n;
    // sum_ij A_ij B_ij = sum a_ij b_ij - 2 n sum_i a_i b_i + n^2 a b
    let cross: f64 = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let (xi, yi) = (x[i], y[i]);
            x.iter().zip(y).map(|(xj, yj)| (xi - xj).abs() * (yi - yj).abs()).sum::<f64>()
        })
        .sum();
    let rows: f64 = ax.iter().zip(ay).map(|(a, b)| a * b).sum();
    (cross / (n * n) - 2.0 * rows / n + a_mean * b_mean).max(0.0)
}

/// Sample distance correlation, in O(n) memory.
pub fn distance_correlation(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    same_len(x, y)?;
    let ax = distance_row_means(x);
    let ay = distance_row_means(y);
    let vx = dcov2(x, x, &ax, &ax);
    let vy = dcov2(y, y, &ay, &ay);
    if vx <= 0.0 || vy <= 0.0 {
        return Ok(0.0);
    }
    let c = dcov2(x, y, &ax, &ay);
    Ok((c / (vx * vy).sqrt()).sqrt())
}

/// Pairwise residual correlations between models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub models: Vec<String>,
    pub pearson: Vec<Vec<f64>>,
    pub distance: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    /// Pearson below the diagonal, distance correlation above, 1 on it.
    pub fn to_text(&self) -> String {
        let w = self.models.iter().map(String::len).max().unwrap_or(0).max(6);
        let mut out = format!("{:<w$}", "");
        for m in &self.models {
            let _ = write!(out, " {m:>w$}");
        }
        out.push('\n');
        for (i, m) in self.models.iter().enumerate() {
            let _ = write!(out, "{m:<w$}");
            for j in 0..self.models.len() {
                let v = match i.cmp(&j) {
                    std::cmp::Ordering::Greater => self.pearson[i][j],
                    std::cmp::Ordering::Less => self.distance[i][j],
                    std::cmp::Ordering::Equal => 1.0,
                };
                let _ = write!(out, " {v:>w$.3}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn error_correlations(runs: &[ForecastRun]) -> Result<CorrelationMatrix, EvalError> {
    if runs.len() < 2 {
        return Err(EvalError::Empty);
    }
    let residuals = runs
        .iter()
        .map(|r| {
            if r.index != runs[0].index {
                return Err(EvalError::IndexMismatch(runs[0].model.clone(), r.model.clone()));
            }
            let a = r.actual.as_deref().ok_or_else(|| EvalError::NoActuals(r.model.clone()))?;
            same_len(&r.predicted, a)?;
            Ok(r.predicted.iter().zip(a).map(|(p, a)| p - a).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let k = runs.len();
    let mut pearson_m = vec![vec![1.0; k]; k];
    let mut distance_m = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let p = pearson(&residuals[i], &residuals[j])?;
            let d = distance_correlation(&residuals[i], &residuals[j])?;
            pearson_m[i][j] = p;
            pearson_m[j][i] = p;
            distance_m[i][j] = d;
            distance_m[j][i] = d;
        }
    }
    Ok(CorrelationMatrix {
        models: runs.iter().map(|r| r.model.clone()).collect(),
        pearson: pearson_m,
        distance: distance_m,
    })
}
