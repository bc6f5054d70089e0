//! LASSO by coordinate descent on standardized columns, with the penalty
//! chosen by BIC along a warm-started path.
//!
//! The objective on the standardized scale is
//! `(1/2n) |y - ybar - Z b|^2 + lambda |b|_1`, so `lambda_max = max |z_j' y| / n`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ForecastError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoConfig {
    /// Convergence threshold on the largest standardized coefficient change
    /// within one sweep.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// The path stops once the explained share of variance reaches this
    /// level or the model has `n - 1` nonzero coefficients; the remaining
    /// grid points would only interpolate the sample.
    pub max_r2: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            tolerance: 1e-8,
            max_sweeps: 10_000,
            max_r2: 1.0 - 1e-6,
        }
    }
}

/// Penalty values to visit, largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaGrid {
    /// `len` log-spaced values from `lambda_max` down to `min_ratio * lambda_max`.
    Auto { len: usize, min_ratio: f64 },
    /// Explicit values on the standardized scale.
    Values(Vec<f64>),
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto {
            len: 100,
            min_ratio: 1e-4,
        }
    }
}

impl LambdaGrid {
    fn resolve(&self, lambda_max: f64) -> Vec<f64> {
        match self {
            LambdaGrid::Auto { len, min_ratio } => {
                let len = (*len).max(1);
                if len == 1 || lambda_max <= 0.0 {
                    return vec![lambda_max.max(0.0)];
                }
                let lo = min_ratio.ln();
                (0..len)
                    .map(|i| lambda_max * (lo * i as f64 / (len - 1) as f64).exp())
                    .collect()
            }
            LambdaGrid::Values(v) => {
                let mut v = v.clone();
                v.sort_by(|a, b| b.total_cmp(a));
                v
            }
        }
    }
}

/// Column means and standard deviations used for standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    /// Population standard deviations; zero marks a dropped constant column.
    pub scales: Vec<f64>,
    pub y_mean: f64,
}

/// One point of the regularization path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    /// Coefficients on the original feature scale.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub rss: f64,
    pub bic: f64,
    pub nonzero: usize,
    pub sweeps: usize,
    /// Whether the tolerance was met before `max_sweeps`.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoPath {
    pub points: Vec<PathPoint>,
    pub lambda_max: f64,
    pub standardization: Standardization,
    pub observations: usize,
}

/// The BIC-selected point of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub bic: f64,
    pub standardization: Standardization,
}

impl LassoFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }

    /// Indices of the nonzero coefficients.
    pub fn support(&self) -> Vec<usize> {
        (0..self.coefficients.len()).filter(|&j| self.coefficients[j] != 0.0).collect()
    }

    /// Intercept-only model, used when no feature varies.
    pub fn constant(mean: f64, features: usize) -> Self {
        LassoFit {
            coefficients: vec![0.0; features],
            intercept: mean,
            lambda: 0.0,
            bic: f64::NAN,
            standardization: Standardization {
                means: vec![0.0; features],
                scales: vec![0.0; features],
                y_mean: mean,
            },
        }
    }
}

pub(crate) fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Standardized problem in covariance form.
struct Problem {
    n: usize,
    kept: Vec<usize>,
    /// Standardized kept columns.
    z: Vec<Vec<f64>>,
    yc: Vec<f64>,
    /// `Z'Z / n` over kept columns, row-major.
    gram: Vec<f64>,
    /// `Z'y / n`.
    zy: Vec<f64>,
    std: Standardization,
}

impl Problem {
    fn new(columns: &[Vec<f64>], y: &[f64]) -> Result<Self, ForecastError> {
        let n = y.len();
        if n < 2 {
            return Err(ForecastError::TooFewObservations(n));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(ForecastError::LengthMismatch {
                expected: n,
                got: c.len(),
            });
        }
        let nf = n as f64;
        let y_mean = y.iter().sum::<f64>() / nf;
        let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let mut means = Vec::with_capacity(columns.len());
        let mut scales = Vec::with_capacity(columns.len());
        let mut kept = Vec::new();
        let mut z = Vec::new();
        for (j, c) in columns.iter().enumerate() {
            let m = c.iter().sum::<f64>() / nf;
            let var = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf;
            let s = var.sqrt();
            let spread = c.iter().fold(0.0f64, |a, v| a.max((v - m).abs()));
            means.push(m);
            if s > 0.0 && spread > 1e-12 * m.abs().max(1e-300) {
                scales.push(s);
                kept.push(j);
                z.push(c.iter().map(|v| (v - m) / s).collect::<Vec<f64>>());
            } else {
                scales.push(0.0);
            }
        }
        if kept.is_empty() {
            return Err(ForecastError::DegenerateDesign);
        }
        let p = kept.len();
        let mut gram = vec![0.0; p * p];
        for a in 0..p {
            for b in a..p {
                let g = z[a].iter().zip(&z[b]).map(|(u, v)| u * v).sum::<f64>() / nf;
                gram[a * p + b] = g;
                gram[b * p + a] = g;
            }
        }
        let zy = z.iter().map(|c| c.iter().zip(&yc).map(|(u, v)| u * v).sum::<f64>() / nf).collect();
        Ok(Problem {
            n,
            kept,
            z,
            yc,
            gram,
            zy,
            std: Standardization { means, scales, y_mean },
        })
    }

    fn lambda_max(&self) -> f64 {
        self.zy.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Coordinate descent from `b` at penalty `lambda`; returns the sweep
    /// count and whether the tolerance was met.
    /// `on_sweep` receives the objective after every sweep.
    fn descend(
        &self,
        b: &mut [f64],
        lambda: f64,
        config: &LassoConfig,
        mut on_sweep: Option<&mut dyn FnMut(f64)>,
    ) -> (usize, bool) {
        let p = self.kept.len();
        // r_j = z_j'y/n - sum_k G_jk b_k
        let mut r: Vec<f64> = (0..p)
            .map(|j| self.zy[j] - (0..p).map(|k| self.gram[j * p + k] * b[k]).sum::<f64>())
            .collect();
        let mut sweeps = 0;
        while sweeps < config.max_sweeps {
            sweeps += 1;
            if sweeps % 25 == 0 && self.active_set_step(b, &mut r, lambda) {
                if let Some(f) = on_sweep.as_mut() {
                    f(self.objective(b, lambda));
                }
            }
            let mut largest = 0.0f64;
            for j in 0..p {
                let g = self.gram[j * p + j];
                let old = b[j];
                let new = soft_threshold(r[j] + g * old, lambda) / g;
                let delta = new - old;
                if delta != 0.0 {
                    b[j] = new;
                    let col = &self.gram[j * p..(j + 1) * p];
                    for (rk, gk) in r.iter_mut().zip(col) {
                        *rk -= delta * gk;
                    }
                    largest = largest.max(delta.abs());
                }
            }
            if let Some(f) = on_sweep.as_mut() {
                f(self.objective(b, lambda));
            }
            if largest < config.tolerance {
                return (sweeps, true);
            }
        }
        (sweeps, false)
    }

    /// Move toward the minimizer of the objective restricted to the
    /// current support and signs, stopping where the first coefficient
    /// would change sign. On that segment the objective is a convex
    /// quadratic decreasing toward its minimizer, so the step never raises
    /// it. `r` is refreshed to match the new coefficients.
    fn active_set_step(&self, b: &mut [f64], r: &mut [f64], lambda: f64) -> bool {
        let p = self.kept.len();
        let support: Vec<usize> = (0..p).filter(|&j| b[j] != 0.0).collect();
        if support.is_empty() {
            return false;
        }
        let m = support.len();
        let g = DMatrix::from_fn(m, m, |a, c| self.gram[support[a] * p + support[c]]);
        let rhs = DVector::from_fn(m, |a, _| self.zy[support[a]] - lambda * b[support[a]].signum());
        let Some(chol) = g.cholesky() else {
            return false;
        };
        let x = chol.solve(&rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let mut t = 1.0f64;
        let mut crossing = None;
        for (a, &j) in support.iter().enumerate() {
            if x[a].signum() != b[j].signum() || x[a] == 0.0 {
                let tj = b[j] / (b[j] - x[a]);
                if tj < t {
                    t = tj;
                    crossing = Some(j);
                }
            }
        }
        let mut trial = b.to_vec();
        for (a, &j) in support.iter().enumerate() {
            trial[j] = b[j] + t * (x[a] - b[j]);
            if trial[j].signum() != b[j].signum() {
                trial[j] = 0.0;
            }
        }
        if let Some(j) = crossing {
            trial[j] = 0.0;
        }
        if self.objective(&trial, lambda) > self.objective(b, lambda) {
            return false;
        }
        b.copy_from_slice(&trial);
        for (j, rj) in r.iter_mut().enumerate() {
            *rj = self.zy[j] - (0..p).map(|k| self.gram[j * p + k] * b[k]).sum::<f64>();
        }
        true
    }

    fn rss(&self, b: &[f64]) -> f64 {
        let mut resid = self.yc.clone();
        for (zj, &bj) in self.z.iter().zip(b) {
            if bj != 0.0 {
                for (e, v) in resid.iter_mut().zip(zj) {
                    *e -= bj * v;
                }
            }
        }
        resid.iter().map(|e| e * e).sum()
    }

    fn objective(&self, b: &[f64], lambda: f64) -> f64 {
        self.rss(b) / (2.0 * self.n as f64) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn point(&self, b: &[f64], lambda: f64, width: usize, sweeps: usize, converged: bool) -> PathPoint {
        let mut coefficients = vec![0.0; width];
        let mut intercept = self.std.y_mean;
        for (k, &j) in self.kept.iter().enumerate() {
            let c = b[k] / self.std.scales[j];
            coefficients[j] = c;
            intercept -= c * self.std.means[j];
        }
        let nonzero = b.iter().filter(|v| **v != 0.0).count();
        let rss = self.rss(b);
        let nf = self.n as f64;
        let bic = nf * (rss.max(f64::MIN_POSITIVE) / nf).ln() + (nonzero + 1) as f64 * nf.ln();
        PathPoint {
            lambda,
            coefficients,
            intercept,
            rss,
            bic,
            nonzero,
            sweeps,
            converged,
        }
    }
}

/// Warm-started coordinate-descent path over `grid`.
pub fn lasso_path(
    columns: &[Vec<f64>],
    y: &[f64],
    grid: &LambdaGrid,
    config: &LassoConfig,
) -> Result<LassoPath, ForecastError> {
    let problem = Problem::new(columns, y)?;
    let lambda_max = problem.lambda_max();
    let mut b = vec![0.0; problem.kept.len()];
    let tss: f64 = problem.yc.iter().map(|v| v * v).sum();
    let mut points: Vec<PathPoint> = Vec::new();
    for lambda in grid.resolve(lambda_max) {
        let (sweeps, converged) = problem.descend(&mut b, lambda, config, None);
        let point = problem.point(&b, lambda, columns.len(), sweeps, converged);
        let saturated = point.rss <= (1.0 - config.max_r2) * tss || point.nonzero + 1 >= problem.n;
        points.push(point);
        if saturated {
            break;
        }
    }
    Ok(LassoPath {
        points,
        lambda_max,
        standardization: problem.std,
        observations: problem.n,
    })
}

/// Fit along `grid` and keep the point with the smallest BIC
/// (`n ln(RSS/n) + (nonzero + 1) ln n`); ties go to the larger penalty.
pub fn lasso_fit(
    columns: &[Vec<f64>],
    y: &[f64],
    grid: &LambdaGrid,
    config: &LassoConfig,
) -> Result<LassoFit, ForecastError> {
    let path = lasso_path(columns, y, grid, config)?;
    let best = path
        .points
        .iter()
        .reduce(|a, b| if b.bic < a.bic { b } else { a })
        .expect("grid is never empty");
    Ok(LassoFit {
        coefficients: best.coefficients.clone(),
        intercept: best.intercept,
        lambda: best.lambda,
        bic: best.bic,
        standardization: path.standardization.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(n: usize, p: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y = (0..n)
            .map(|i| cols.iter().enumerate().map(|(j, c)| (j as f64 - 1.5) * c[i]).sum::<f64>() + rng.random_range(-0.3..0.3))
            .collect();
        (cols, y)
    }

    #[test]
    fn objective_decreases_every_sweep() {
        let (cols, y) = random_problem(200, 6, 3);
        let problem = Problem::new(&cols, &y).unwrap();
        let lambda = 0.05 * problem.lambda_max();
        let mut b = vec![0.0; 6];
        let mut seen = vec![problem.objective(&b, lambda)];
        let mut record = |v| seen.push(v);
        problem.descend(&mut b, lambda, &LassoConfig::default(), Some(&mut record));
        assert!(seen.len() > 2);
        for w in seen.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn lambda_max_gives_empty_model() {
        let (cols, y) = random_problem(100, 4, 5);
        let path = lasso_path(&cols, &y, &LambdaGrid::default(), &LassoConfig::default()).unwrap();
        assert!(path.points.len() > 10);
        assert!(path.points[0].coefficients.iter().all(|c| *c == 0.0));
        let over = LambdaGrid::Values(vec![path.lambda_max * 1.5]);
        let fit = lasso_fit(&cols, &y, &over, &LassoConfig::default()).unwrap();
        assert!(fit.support().is_empty());
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((fit.intercept - mean).abs() < 1e-12);
    }

    #[test]
    fn constant_columns_are_dropped() {
        let (mut cols, y) = random_problem(100, 3, 7);
        cols.push(vec![4.0; 100]);
        let fit = lasso_fit(&cols, &y, &LambdaGrid::default(), &LassoConfig::default()).unwrap();
        assert_eq!(fit.coefficients[3], 0.0);
        assert_eq!(fit.standardization.scales[3], 0.0);
    }

    #[test]
    fn degenerate_design() {
        let cols = vec![vec![1.0; 5], vec![2.0; 5]];
        let err = lasso_fit(&cols, &[1.0, 2.0, 3.0, 4.0, 5.0], &LambdaGrid::default(), &LassoConfig::default());
        assert!(matches!(err, Err(ForecastError::DegenerateDesign)));
        assert!(matches!(
            lasso_fit(&[vec![1.0]], &[1.0], &LambdaGrid::default(), &LassoConfig::default()),
            Err(ForecastError::TooFewObservations(1))
        ));
    }

    #[test]
    fn bic_choice_is_grid_minimum() {
        let (cols, y) = random_problem(300, 8, 11);
        let path = lasso_path(&cols, &y, &LambdaGrid::default(), &LassoConfig::default()).unwrap();
        let fit = lasso_fit(&cols, &y, &LambdaGrid::default(), &LassoConfig::default()).unwrap();
        assert!(path.points.iter().all(|p| fit.bic <= p.bic));
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }
}
