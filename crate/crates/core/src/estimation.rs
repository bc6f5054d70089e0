//! Box-constrained derivative-free minimization of the training MAE, and
//! greedy forward selection over the parameter groups.
//!
//! The search is differential evolution (current-to-pbest/1/bin with
//! dithered mutation by default) with restarts on collapse or stall,
//! followed by a compass pattern search around the incumbent.
//! Candidates of one generation are evaluated in parallel; all random
//! draws happen on the calling thread, so a seed fixes the result
//! regardless of the number of workers.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::market_data::SeriesKey;
use crate::stack_assembly::{
    AssemblyError, GroupMask, MeritOrderModel, Mode, ParamGroup, ParameterSet, PricingScratch,
};

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("evaluation budget must be at least 1")]
    BudgetTooSmall,
    #[error("the panel has no price series to fit against")]
    NoPrices,
    #[error("objective needs at least one hour")]
    NoHours,
    #[error("initial parameters are outside their box")]
    InitOutOfBox,
    #[error("forward selection needs at least one group")]
    NoGroups,
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// Loss between modelled and observed prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Mae,
}

/// Training objective: the loss of the model's prices over a fixed set of
/// hours.
#[derive(Debug)]
pub struct Objective<'m, 'a> {
    model: &'m MeritOrderModel<'a>,
    hours: Vec<usize>,
    observed: Vec<f64>,
    mode: Mode,
    loss: Loss,
}

impl<'m, 'a> Objective<'m, 'a> {
    pub fn new(model: &'m MeritOrderModel<'a>, hours: Vec<usize>, mode: Mode) -> Result<Self, EstimationError> {
        if hours.is_empty() {
            return Err(EstimationError::NoHours);
        }
        let price = model.panel().get(&SeriesKey::Price).ok_or(EstimationError::NoPrices)?;
        if let Some(&t) = hours.iter().find(|&&t| t >= price.len()) {
            return Err(AssemblyError::HourOutOfRange(t).into());
        }
        let observed = hours.iter().map(|&t| price[t]).collect();
        Ok(Objective {
            model,
            hours,
            observed,
            mode,
            loss: Loss::Mae,
        })
    }

    /// Every hour of the model's panel with realized inputs.
    pub fn train(model: &'m MeritOrderModel<'a>) -> Result<Self, EstimationError> {
        Self::new(model, (0..model.panel().len()).collect(), Mode::Train)
    }

    pub fn model(&self) -> &MeritOrderModel<'a> {
        self.model
    }

    pub fn hours(&self) -> &[usize] {
        &self.hours
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    /// Loss at `theta`, summed sequentially in hour order.
    pub fn evaluate(&self, theta: &ParameterSet) -> Result<f64, EstimationError> {
        self.model.check_params(theta)?;
        let mut scratch = PricingScratch::default();
        self.evaluate_with(theta, &mut scratch)
    }

    fn evaluate_with(&self, theta: &ParameterSet, scratch: &mut PricingScratch) -> Result<f64, EstimationError> {
        let mut sum = 0.0;
        for (&t, &obs) in self.hours.iter().zip(&self.observed) {
            let p = self.model.price_with(theta, t, self.mode, scratch)?;
            sum += match self.loss {
                Loss::Mae => (p - obs).abs(),
            };
        }
        Ok(sum / self.hours.len() as f64)
    }

    fn evaluate_batch(&self, batch: &[ParameterSet]) -> Result<Vec<f64>, EstimationError> {
        batch
            .par_iter()
            .map_init(PricingScratch::default, |s, theta| self.evaluate_with(theta, s))
            .collect()
    }
}

/// Training MAE of `theta`.
pub fn evaluate_objective(objective: &Objective<'_, '_>, theta: &ParameterSet) -> Result<f64, EstimationError> {
    objective.evaluate(theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Maximum number of objective evaluations.
    pub budget: usize,
    /// Optional wall-clock cap in seconds, checked between batches.
    pub max_seconds: Option<f64>,
    pub seed: u64,
    /// Population size; derived from the dimension when absent.
    pub population: Option<usize>,
    /// Share of the budget reserved for the final pattern search.
    pub polish_share: f64,
    pub crossover: f64,
    pub strategy: Strategy,
    /// Keep every efficiency pair ordered (`eta_low <= eta_high`).
    pub canonical_efficiencies: bool,
    /// Relative score spread below which the population is reseeded.
    pub restart_tolerance: f64,
    /// Generations without a relative improvement of `restart_tolerance`
    /// after which the population is reseeded as well.
    pub stall_generations: usize,
}

/// Differential-evolution mutation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// `x_r0 + F (x_r1 - x_r2)`: explorative.
    Rand1,
    /// `x_i + F (x_best - x_i) + F (x_r1 - x_r2)`: greedier.
    RandToBest1,
    /// As `RandToBest1` but pulled toward a random member of the best 20%.
    #[default]
    CurrentToPBest1,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            budget: 3600,
            max_seconds: None,
            seed: 0,
            population: None,
            polish_share: 0.3,
            crossover: 0.9,
            strategy: Strategy::default(),
            canonical_efficiencies: true,
            restart_tolerance: 1e-3,
            stall_generations: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta_hat: ParameterSet,
    pub train_mae: f64,
    pub eval_count: usize,
    pub seed: u64,
    /// Best objective value after each evaluation.
    pub trace: Vec<f64>,
    /// Times the population was reseeded after collapsing.
    pub restarts: usize,
    pub elapsed: Duration,
}

impl FitResult {
    /// Parameters, score and trace as pretty JSON. The elapsed time is
    /// left out, so equal runs serialize to equal bytes.
    pub fn to_json(&self) -> String {
        let specs = self.theta_hat.layout().specs();
        let params: Vec<_> = specs
            .iter()
            .zip(self.theta_hat.values())
            .map(|(s, v)| {
                json!({
                    "name": s.name, "group": s.group, "value": v,
                    "lower": s.lower, "upper": s.upper, "init": s.init,
                    "free": self.theta_hat.active().contains(s.group),
                })
            })
            .collect();
        serde_json::to_string_pretty(&json!({
            "active": self.theta_hat.active(),
            "train_mae": self.train_mae,
            "eval_count": self.eval_count,
            "seed": self.seed,
            "restarts": self.restarts,
            "parameters": params,
            "trace": self.trace,
        }))
        .expect("fit result serializes")
    }

    /// `evaluation,best` rows.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("evaluation,best\n");
        for (i, v) in self.trace.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, v);
        }
        out
    }
}

struct Search<'o, 'm, 'a> {
    objective: &'o Objective<'m, 'a>,
    budget: usize,
    deadline: Option<Instant>,
    trace: Vec<f64>,
    best: f64,
    best_theta: ParameterSet,
}

impl Search<'_, '_, '_> {
    fn remaining(&self) -> usize {
        let timed_out = self.deadline.is_some_and(|d| Instant::now() >= d);
        if timed_out {
            0
        } else {
            self.budget - self.trace.len()
        }
    }

    /// Evaluate as much of `batch` as the budget allows; returns the
    /// scores of the evaluated prefix.
    fn run(&mut self, batch: &[ParameterSet]) -> Result<Vec<f64>, EstimationError> {
        let n = batch.len().min(self.remaining());
        let scores = self.objective.evaluate_batch(&batch[..n])?;
        for (theta, &s) in batch.iter().zip(&scores) {
            if s < self.best {
                self.best = s;
                self.best_theta = theta.clone();
            }
            self.trace.push(self.best);
        }
        Ok(scores)
    }
}

/// Minimize the objective from `init` within the box.
pub fn fit(objective: &Objective<'_, '_>, init: &ParameterSet, config: &FitConfig) -> Result<FitResult, EstimationError> {
    if config.budget < 1 {
        return Err(EstimationError::BudgetTooSmall);
    }
    if !init.in_box() {
        return Err(EstimationError::InitOutOfBox);
    }
    objective.model().check_params(init)?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let free = init.free_indices();
    let specs = init.layout().specs();
    let lower: Vec<f64> = free.iter().map(|&i| specs[i].lower).collect();
    let upper: Vec<f64> = free.iter().map(|&i| specs[i].upper).collect();
    let d = free.len();

    let mut search = Search {
        objective,
        budget: config.budget,
        deadline: config.max_seconds.map(|s| started + Duration::from_secs_f64(s)),
        trace: Vec::with_capacity(config.budget),
        best: f64::INFINITY,
        best_theta: init.clone(),
    };
    // Efficiency pairs are symmetric (costs are sorted), so candidates are
    // kept with eta_low <= eta_high. Swapping always stays inside the box.
    let pairs: Vec<(usize, usize)> = if config.canonical_efficiencies {
        efficiency_pairs(init, &free)
    } else {
        Vec::new()
    };
    let canonical = |x: &mut Vec<f64>| {
        for &(lo, hi) in &pairs {
            if x[lo] > x[hi] {
                x.swap(lo, hi);
            }
        }
    };
    let with = |x: &[f64]| {
        let mut theta = init.clone();
        for (k, &i) in free.iter().enumerate() {
            theta.set_clipped(i, x[k]);
        }
        theta
    };

    let mut restarts = 0usize;
    // The initial point is always the first evaluation.
    search.run(std::slice::from_ref(init))?;
    if d > 0 && search.remaining() > 0 {
        let polish_budget = ((config.budget as f64) * config.polish_share.clamp(0.0, 1.0)) as usize;
        let de_budget = config.budget.saturating_sub(polish_budget);
        let np = config.population.unwrap_or((2 * d).clamp(10, 40)).max(4);
        let x0: Vec<f64> = free.iter().map(|&i| init.values()[i]).collect();

        // Initial population: the start point plus uniform draws.
        let mut pop: Vec<Vec<f64>> = vec![x0];
        while pop.len() < np {
            let mut x: Vec<f64> = (0..d).map(|k| rng.random_range(lower[k]..=upper[k])).collect();
            canonical(&mut x);
            pop.push(x);
        }
        let batch: Vec<ParameterSet> = pop[1..].iter().map(|x| with(x)).collect();
        let mut scores = vec![search.trace[0]];
        scores.extend(search.run(&batch)?);
        pop.truncate(scores.len());

        let mut mark = f64::INFINITY;
        let mut stalled = 0usize;
        while pop.len() >= 4 && search.trace.len() < de_budget && search.remaining() > 0 {
            let best = (0..pop.len()).min_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap_or(0);
            if scores[best] < mark - config.restart_tolerance * (1.0 + scores[best].abs()) {
                mark = scores[best];
                stalled = 0;
            } else {
                stalled += 1;
            }
            let f = rng.random_range(0.5..1.0);
            let mut ranked: Vec<usize> = (0..pop.len()).collect();
            ranked.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
            let elite = pop.len().div_ceil(5).max(2);
            let trials: Vec<Vec<f64>> = (0..pop.len())
                .map(|i| {
                    let (r1, r2) = distinct_pair(&mut rng, pop.len(), i);
                    let (base, pull) = match config.strategy {
                        Strategy::Rand1 => (third_index(&mut rng, pop.len(), [i, r1, r2]), None),
                        Strategy::RandToBest1 => (i, Some(best)),
                        Strategy::CurrentToPBest1 => (i, Some(ranked[rng.random_range(0..elite)])),
                    };
                    let forced = rng.random_range(0..d);
                    let mut x: Vec<f64> = (0..d)
                        .map(|k| {
                            if k == forced || rng.random::<f64>() < config.crossover {
                                let toward = pull.map_or(0.0, |b| f * (pop[b][k] - pop[i][k]));
                                let v = pop[base][k] + toward + f * (pop[r1][k] - pop[r2][k]);
                                v.clamp(lower[k], upper[k])
                            } else {
                                pop[i][k]
                            }
                        })
                        .collect();
                    canonical(&mut x);
                    x
                })
                .collect();
            let room = de_budget - search.trace.len();
            let batch: Vec<ParameterSet> = trials.iter().take(room).map(|x| with(x)).collect();
            let trial_scores = search.run(&batch)?;
            for (i, s) in trial_scores.into_iter().enumerate() {
                if s <= scores[i] {
                    scores[i] = s;
                    pop[i].clone_from(&trials[i]);
                }
            }

            // A collapsed or stalled population has found its basin; reseed
            // it so the rest of the budget explores elsewhere. The incumbent
            // is kept by the search and polished at the end.
            let (lo, hi) = scores.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            let left = de_budget.saturating_sub(search.trace.len());
            let collapsed = hi - lo <= config.restart_tolerance * (1.0 + lo.abs());
            let stuck = config.stall_generations > 0 && stalled >= config.stall_generations;
            if (collapsed || stuck) && left >= 4 * np {
                mark = f64::INFINITY;
                stalled = 0;
                let fresh: Vec<Vec<f64>> = (0..np)
                    .map(|_| {
                        let mut x: Vec<f64> = (0..d).map(|k| rng.random_range(lower[k]..=upper[k])).collect();
                        canonical(&mut x);
                        x
                    })
                    .collect();
                let batch: Vec<ParameterSet> = fresh.iter().map(|x| with(x)).collect();
                scores = search.run(&batch)?;
                pop = fresh;
                pop.truncate(scores.len());
                restarts += 1;
            }
        }

        // Compass search around the incumbent with the remaining budget.
        let mut centre: Vec<f64> = free.iter().map(|&i| search.best_theta.values()[i]).collect();
        let mut step: Vec<f64> = (0..d).map(|k| 0.05 * (upper[k] - lower[k])).collect();
        while search.remaining() > 0 {
            let mut probes = Vec::with_capacity(2 * d);
            for k in 0..d {
                for dir in [1.0, -1.0] {
                    let mut x = centre.clone();
                    x[k] = (x[k] + dir * step[k]).clamp(lower[k], upper[k]);
                    if x[k] != centre[k] {
                        probes.push(x);
                    }
                }
            }
            if probes.is_empty() {
                break;
            }
            let before = search.best;
            let batch: Vec<ParameterSet> = probes.iter().map(|x| with(x)).collect();
            let s = search.run(&batch)?;
            let improved = s
                .iter()
                .enumerate()
                .filter(|(_, &v)| v < before)
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i);
            match improved {
                Some(i) => centre.clone_from(&probes[i]),
                None => {
                    step.iter_mut().for_each(|s| *s *= 0.5);
                    let tiny = step.iter().zip(&upper).zip(&lower).all(|((s, u), l)| *s < 1e-9 * (u - l));
                    if tiny {
                        break;
                    }
                }
            }
        }
    }

    let theta_hat = search.best_theta;
    let train_mae = objective.evaluate(&theta_hat)?;
    Ok(FitResult {
        theta_hat,
        train_mae,
        eval_count: search.trace.len(),
        seed: config.seed,
        trace: search.trace,
        restarts,
        elapsed: started.elapsed(),
    })
}

/// Positions within `free` of each `(eta_low.X, eta_high.X)` pair.
fn efficiency_pairs(theta: &ParameterSet, free: &[usize]) -> Vec<(usize, usize)> {
    let layout = theta.layout();
    let slot = |i: usize| free.iter().position(|&f| f == i);
    layout
        .specs()
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            let plant = s.name.strip_prefix("eta_low.")?;
            let j = layout.position(&format!("eta_high.{plant}"))?;
            Some((slot(i)?, slot(j)?))
        })
        .collect()
}

fn third_index(rng: &mut ChaCha8Rng, n: usize, exclude: [usize; 3]) -> usize {
    loop {
        let r = rng.random_range(0..n);
        if !exclude.contains(&r) {
            return r;
        }
    }
}

fn distinct_pair(rng: &mut ChaCha8Rng, n: usize, exclude: usize) -> (usize, usize) {
    let mut r1 = rng.random_range(0..n);
    while r1 == exclude {
        r1 = rng.random_range(0..n);
    }
    let mut r2 = rng.random_range(0..n);
    while r2 == exclude || r2 == r1 {
        r2 = rng.random_range(0..n);
    }
    (r1, r2)
}

/// One fitted configuration in the selection tree.
#[derive(Debug, Clone)]
pub struct SelectionNode {
    pub id: usize,
    pub level: usize,
    pub parent: Option<usize>,
    pub added: Option<ParamGroup>,
    pub groups: GroupMask,
    pub theta: ParameterSet,
    pub train_mae: f64,
    pub test_mae: Option<f64>,
    pub eval_count: usize,
    pub seed: u64,
    pub on_path: bool,
}

#[derive(Debug, Clone)]
pub struct SelectionTree {
    pub nodes: Vec<SelectionNode>,
}

impl SelectionTree {
    pub fn root(&self) -> &SelectionNode {
        &self.nodes[0]
    }

    pub fn level(&self, level: usize) -> impl Iterator<Item = &SelectionNode> {
        self.nodes.iter().filter(move |n| n.level == level)
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    /// Greedy path from the root to the deepest level.
    pub fn path(&self) -> Vec<&SelectionNode> {
        self.nodes.iter().filter(|n| n.on_path).collect()
    }

    pub fn to_json(&self) -> String {
        let nodes: Vec<_> = self
            .nodes
            .iter()
            .map(|n| {
                json!({
                    "id": n.id, "level": n.level, "parent": n.parent, "added": n.added,
                    "groups": n.groups, "train_mae": n.train_mae, "test_mae": n.test_mae,
                    "eval_count": n.eval_count, "seed": n.seed, "on_path": n.on_path,
                    "theta": n.theta.named_values().map(|(k, v)| (k.to_string(), v)).collect::<std::collections::BTreeMap<_, _>>(),
                })
            })
            .collect();
        serde_json::to_string_pretty(&json!({ "nodes": nodes })).expect("tree serializes")
    }

    /// One row per level, one line per node; `*` marks the greedy path.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for level in 0..=self.depth() {
            let _ = writeln!(out, "level {level}");
            for n in self.level(level) {
                let test = n.test_mae.map_or_else(String::new, |m| format!("  test {m:.4}"));
                let mark = if n.on_path { " *" } else { "" };
                let _ = writeln!(
                    out,
                    "{}{:<60} train {:.4}{test}{mark}",
                    "  ".repeat(level + 1),
                    n.groups.to_string(),
                    n.train_mae
                );
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectConfig {
    pub fit: FitConfig,
}

fn node_seed(seed: u64, groups: GroupMask) -> u64 {
    let bits: u64 = groups.iter().map(|g| 1u64 << (g as u64)).sum();
    seed ^ bits.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Greedy forward selection over `groups` starting from `base` (usually
/// the classical parameters). Each child is warm-started from its parent's
/// estimate, so train MAE is nonincreasing along the greedy path.
pub fn forward_select(
    train: &Objective<'_, '_>,
    test: Option<&Objective<'_, '_>>,
    base: &ParameterSet,
    groups: &[ParamGroup],
    config: &SelectConfig,
) -> Result<SelectionTree, EstimationError> {
    if groups.is_empty() {
        return Err(EstimationError::NoGroups);
    }
    let test_mae = |theta: &ParameterSet| test.map(|o| o.evaluate(theta)).transpose();
    let mut nodes = vec![SelectionNode {
        id: 0,
        level: 0,
        parent: None,
        added: None,
        groups: base.active(),
        theta: base.clone(),
        train_mae: train.evaluate(base)?,
        test_mae: test_mae(base)?,
        eval_count: 1,
        seed: config.fit.seed,
        on_path: true,
    }];
    let mut parent = 0;
    let mut remaining: Vec<ParamGroup> = groups.to_vec();
    let mut level = 1;
    while !remaining.is_empty() {
        let mut children = Vec::new();
        for &g in &remaining {
            let mut start = nodes[parent].theta.clone();
            start.activate(g);
            let seed = node_seed(config.fit.seed, start.active());
            let result = fit(train, &start, &FitConfig { seed, ..config.fit.clone() })?;
            let id = nodes.len();
            children.push(id);
            nodes.push(SelectionNode {
                id,
                level,
                parent: Some(parent),
                added: Some(g),
                groups: result.theta_hat.active(),
                test_mae: test_mae(&result.theta_hat)?,
                theta: result.theta_hat,
                train_mae: result.train_mae,
                eval_count: result.eval_count,
                seed,
                on_path: false,
            });
        }
        let best = children
            .iter()
            .copied()
            .min_by(|&a, &b| nodes[a].train_mae.total_cmp(&nodes[b].train_mae))
            .expect("at least one child");
        nodes[best].on_path = true;
        let added = nodes[best].added.expect("children add a group");
        remaining.retain(|&g| g != added);
        parent = best;
        level += 1;
    }
    Ok(SelectionTree { nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{synthesize_market, SeriesProfile, SynthSpec};

    fn small_market(noise: f64) -> crate::market_data::SyntheticMarket {
        let spec = SynthSpec {
            hours: 24 * 20,
            plants: vec!["gas".into(), "coal".into(), "pv".into()],
            price_noise: noise,
            theta: [("eta_low.gas", 0.3), ("eta_high.gas", 0.5)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            load: SeriesProfile {
                mean: 30_000.0,
                daily_amplitude: 6000.0,
                noise: 1000.0,
                ..Default::default()
            },
            ..SynthSpec::default()
        };
        synthesize_market(&spec, 5).unwrap()
    }

    #[test]
    fn zero_at_generating_parameters() {
        let m = small_market(0.0);
        let model = MeritOrderModel::new(&m.catalog, &m.panel).unwrap();
        let obj = Objective::train(&model).unwrap();
        assert_eq!(obj.evaluate(&m.theta_star).unwrap(), 0.0);
    }

    #[test]
    fn init_is_always_evaluated_first() {
        let m = small_market(0.0);
        let model = MeritOrderModel::new(&m.catalog, &m.panel).unwrap();
        let obj = Objective::train(&model).unwrap();
        let init = m.theta_star.clone();
        let res = fit(&obj, &init, &FitConfig { budget: 50, ..Default::default() }).unwrap();
        assert_eq!(res.trace[0], 0.0);
        assert_eq!(res.train_mae, 0.0);
        assert!(res.eval_count <= 50);
    }

    #[test]
    fn trace_is_nonincreasing_and_box_respected() {
        let m = small_market(0.0);
        let model = MeritOrderModel::new(&m.catalog, &m.panel).unwrap();
        let obj = Objective::train(&model).unwrap();
        let init = model.classical().with_groups(GroupMask::empty().with(ParamGroup::Efficiencies));
        let res = fit(&obj, &init, &FitConfig { budget: 300, seed: 3, ..Default::default() }).unwrap();
        assert!(res.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(res.theta_hat.in_box());
        assert_eq!(res.eval_count, 300);
        assert_eq!(res.train_mae, *res.trace.last().unwrap());
        assert!(res.train_mae <= obj.evaluate(&init).unwrap());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let m = small_market(1.0);
        let model = MeritOrderModel::new(&m.catalog, &m.panel).unwrap();
        let obj = Objective::train(&model).unwrap();
        let init = model.classical().with_groups(GroupMask::empty().with(ParamGroup::Efficiencies));
        let cfg = FitConfig { budget: 200, seed: 9, ..Default::default() };
        let a = fit(&obj, &init, &cfg).unwrap();
        let b = fit(&obj, &init, &cfg).unwrap();
        assert_eq!(a.theta_hat, b.theta_hat);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn budget_too_small() {
        let m = small_market(0.0);
        let model = MeritOrderModel::new(&m.catalog, &m.panel).unwrap();
        let obj = Objective::train(&model).unwrap();
        let cfg = FitConfig { budget: 0, ..Default::default() };
        assert!(matches!(fit(&obj, &model.classical(), &cfg), Err(EstimationError::BudgetTooSmall)));
    }

    #[test]
    fn two_group_tree_shape() {
        let m = small_market(0.5);
        let model = MeritOrderModel::new(&m.catalog, &m.panel).unwrap();
        let obj = Objective::train(&model).unwrap();
        let cfg = SelectConfig {
            fit: FitConfig { budget: 60, seed: 1, ..Default::default() },
        };
        let tree = forward_select(&obj, None, &model.classical(), &[ParamGroup::Efficiencies, ParamGroup::Bids], &cfg)
            .unwrap();
        assert_eq!(tree.nodes.len(), 1 + 2 + 1);
        assert_eq!(tree.path().len(), 3);
        assert!(tree.to_text().contains("efficiencies+bids"));
    }
}
