//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so every criterion is
//! reported even when an earlier one fails. Exits non-zero on any failure.

mod common;

use std::cell::Cell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use chrono::{Datelike, Weekday};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use common::*;
use merit_core::estimation::{fit, forward_select, FitConfig, Objective, SelectConfig};
use merit_core::evaluation::{distance_correlation, evaluate_runs, mae, pearson};
use merit_core::forecasters::{
    lasso_fit, lasso_path, naive_price, Benchmark, LambdaGrid, LassoConfig, LinearForecaster, LinearSpec,
    AVAILABLE_HOURS,
};
use merit_core::marginal_costs::CostBounds;
use merit_core::market_data::{
    synthesize_market, Fuel, HourlyPanel, PlantCatalog, PlantRole, PlantType, SeriesKey, SeriesProfile, SynthSpec, VolumeSource,
    PRICE_CAP,
};
use merit_core::merit_curve::{aggregate, components_at, curve_eval, curve_invert, PlantStack};
use merit_core::stack_assembly::{GroupMask, MeritOrderModel, Mode, ParamGroup};
use merit_core::ForecastRun;

type Check = fn() -> Result<String, String>;

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("nesting equality", nesting_equality),
        ("aggregation oracle", aggregation_oracle),
        ("round trip and monotonicity", round_trip_and_monotonicity),
        ("component closure", component_closure),
        ("synthetic recovery", synthetic_recovery),
        ("runtime", runtime),
        ("lasso correctness", lasso_correctness),
        ("benchmark exactness", benchmark_exactness),
        ("forward selection", forward_selection),
        ("evaluation recombination", evaluation_recombination),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let k = k + 1;
        if only.is_some_and(|o| o != k) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{k}] {name} ({secs:.2}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{k}] {name} ({secs:.2}s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: f64, what: &str) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_secs, || {
        format!("{what} took {:.2}s, limit {limit_secs}s", elapsed.as_secs_f64())
    })
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

// ---------------------------------------------------------------------------
// Fleet fixtures

/// Panel carrying every input of the default German fleet, with noisy
/// daily shapes.
fn fleet_panel(catalog: &PlantCatalog, hours: usize, seed: u64) -> HourlyPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let days = hours.div_ceil(24);
    let mut keys = vec![
        SeriesKey::LoadActual,
        SeriesKey::LoadDa,
        SeriesKey::Hydro,
        SeriesKey::NetImport,
        SeriesKey::Eua,
        SeriesKey::Price,
    ];
    keys.extend(Fuel::ALL.into_iter().map(SeriesKey::FuelPrice));
    for p in catalog.enabled().filter(|p| p.role == PlantRole::Standard) {
        match p.volume {
            VolumeSource::Capacity => keys.push(SeriesKey::Capacity(p.id.clone())),
            VolumeSource::Generation => {
                keys.push(SeriesKey::Generation(p.id.clone()));
                keys.push(SeriesKey::ResDa(p.id.clone()));
            }
        }
    }
    let noise: Vec<Vec<f64>> = keys
        .iter()
        .map(|_| (0..24 * days).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let panel = panel_from(start(2023, 1, 2), days, &keys, |k, d, h| {
        let i = keys.iter().position(|x| x == k).unwrap();
        let e = noise[i][24 * d + h];
        let daily = (2.0 * std::f64::consts::PI * h as f64 / 24.0).sin();
        match k {
            SeriesKey::LoadActual | SeriesKey::LoadDa => 50_000.0 + 9_000.0 * daily + 3_000.0 * e,
            SeriesKey::Hydro => 1_500.0 + 300.0 * e,
            SeriesKey::NetImport => 2_500.0 + 2_000.0 * e,
            SeriesKey::Eua => 85.0 + 5.0 * noise[i][24 * d],
            SeriesKey::Price => 90.0 + 30.0 * daily + 20.0 * e,
            SeriesKey::FuelPrice(f) => 6.0 + 9.0 * (*f as usize) as f64 + 2.0 * noise[i][24 * d],
            SeriesKey::Capacity(_) => 6_000.0 + 1_500.0 * e,
            SeriesKey::Generation(_) | SeriesKey::ResDa(_) => 3_500.0 + 2_000.0 * daily + 1_000.0 * e,
            _ => unreachable!(),
        }
    });
    if hours.is_multiple_of(24) {
        panel
    } else {
        panel.slice(0..hours)
    }
}

/// Classical merit order coded from the published tables, without any of
/// the library's parameter or assembly machinery: fuel-fired plants at
/// their expert efficiencies, renewables at their bid ranges, capacity
/// corrections of 1.5 where the classical column sets them.
fn classical_oracle_stacks(panel: &HourlyPanel, t: usize) -> Vec<(f64, f64, f64)> {
    let fuel = |f: Fuel| panel.get(&SeriesKey::FuelPrice(f)).unwrap()[t];
    let eua = panel.get(&SeriesKey::Eua).unwrap()[t];
    let conventional = [
        ("gas", Fuel::Gas, 0.25, 0.40, 0.20, 1.5),
        ("coal", Fuel::Coal, 0.35, 0.46, 0.30, 1.5),
        ("lignite", Fuel::Lignite, 0.30, 0.43, 0.40, 1.5),
        ("oil", Fuel::Oil, 0.24, 0.44, 0.30, 1.5),
        ("nuclear", Fuel::Nuclear, 0.32, 0.42, 0.03, 1.0),
    ];
    let renewable = [
        ("pv", -500.0, 1.0),
        ("wind_onshore", -70.0, 1.0),
        ("wind_offshore", -150.0, 1.0),
        ("biomass", -200.0, 1.5),
        ("other_res", -500.0, 1.0),
    ];
    let mut out = Vec::new();
    for (id, f, eta_low, eta_high, co2, cf) in conventional {
        let thermal = fuel(f) + co2 * eua;
        let (a, b) = (thermal / eta_low, thermal / eta_high);
        let low = a.min(b).clamp(-500.0, 3000.0);
        let high = a.max(b).clamp(-500.0, 3000.0);
        let cap = panel.get(&SeriesKey::Capacity(id.into())).unwrap()[t] * cf;
        out.push((cap, low, high));
    }
    for (id, bid_low, cf) in renewable {
        let cap = panel.get(&SeriesKey::Generation(id.into())).unwrap()[t] * cf;
        out.push((cap.max(0.0), bid_low, 20.0));
    }
    out
}

/// Quantity offered by a `(cap, low, high)` stack at price `p`, with a flat
/// stack fully dispatched at its cost.
fn offered(cap: f64, low: f64, high: f64, p: f64) -> f64 {
    if p >= high {
        cap
    } else if p <= low {
        0.0
    } else {
        cap * (p - low) / (high - low)
    }
}

fn offered_below(cap: f64, low: f64, high: f64, p: f64) -> f64 {
    if low == high {
        if p > low {
            cap
        } else {
            0.0
        }
    } else {
        offered(cap, low, high, p)
    }
}

/// Breakpoints of the aggregate curve: at every distinct cost, the
/// quantity just below and at that price.
fn oracle_breakpoints(stacks: &[(f64, f64, f64)]) -> Vec<(f64, f64)> {
    let live: Vec<_> = stacks.iter().copied().filter(|s| s.0 > 0.0).collect();
    let mut prices: Vec<f64> = live.iter().flat_map(|s| [s.1, s.2]).collect();
    prices.sort_by(f64::total_cmp);
    prices.dedup();
    let mut pts = Vec::new();
    for p in prices {
        let below: f64 = live.iter().map(|&(c, l, h)| offered_below(c, l, h, p)).sum();
        let at: f64 = live.iter().map(|&(c, l, h)| offered(c, l, h, p)).sum();
        pts.push((below, p));
        if at > below {
            pts.push((at, p));
        }
    }
    pts
}

/// Price at quantity `q` on a breakpoint list: the upper price at vertical
/// steps, the cap beyond total capacity.
fn oracle_price(pts: &[(f64, f64)], q: f64) -> f64 {
    let last = pts[pts.len() - 1];
    if q > last.0 {
        return PRICE_CAP;
    }
    match pts.iter().position(|b| b.0 > q) {
        None => last.1,
        Some(i) => {
            let (a, b) = (pts[i - 1], pts[i]);
            a.1 + (q - a.0) / (b.0 - a.0) * (b.1 - a.1)
        }
    }
}

/// Random fleets of up to 8 stacks; about a quarter are flat, a few carry
/// no capacity, and costs are drawn from a small set so that ties between
/// stacks are common.
fn fleet_strategy() -> impl Strategy<Value = Vec<PlantStack>> {
    let cost = prop_oneof![
        3 => -500.0..3000.0f64,
        1 => prop::sample::select(vec![-500.0, -70.0, 0.0, 20.0, 45.0, 80.0, 3000.0]),
    ];
    let stack = (prop_oneof![6 => 0.0..10_000.0f64, 1 => Just(0.0)], cost.clone(), cost, prop::bool::weighted(0.25));
    prop::collection::vec(stack, 1..=8).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(tag, (cap, a, b, flat))| {
                let bounds = if flat { CostBounds::flat(a) } else { CostBounds::from_candidates(a, b) };
                PlantStack::new(tag, cap, bounds)
            })
            .collect()
    })
}

// ---------------------------------------------------------------------------
// Criteria

fn nesting_equality() -> Result<String, String> {
    let t0 = Instant::now();
    let catalog = PlantCatalog::german_default();
    let hours = 24 * 30;
    let panel = fleet_panel(&catalog, hours, 11);
    let model = MeritOrderModel::new(&catalog, &panel).map_err(|e| e.to_string())?;
    ensure(model.stack_info().len() == 14, || format!("{} stacks, expected 14", model.stack_info().len()))?;
    let theta = model.classical();
    ensure(theta.active().is_empty(), || "classical parameters have active extensions".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked_hours = std::collections::BTreeSet::new();
    for _ in 0..1000 {
        let t = rng.random_range(0..hours);
        let (curve, _) = model.curve(&theta, t, Mode::Train).map_err(|e| e.to_string())?;
        let oracle = oracle_breakpoints(&classical_oracle_stacks(&panel, t));
        if checked_hours.insert(t) {
            let got: Vec<(f64, f64)> = curve.points().iter().map(|b| (b.q, b.p)).collect();
            ensure(got == oracle, || format!("breakpoints differ at hour {t}"))?;
        }
        let q = rng.random_range(0.0..=curve.total_capacity());
        let (m, o) = (curve_eval(&curve, q).unwrap(), oracle_price(&oracle, q));
        ensure(m.to_bits() == o.to_bits(), || format!("hour {t}, q {q}: model {m}, classical {o}"))?;
    }
    within(t0.elapsed(), 5.0, "1000 points")?;
    Ok(format!("1000 points over {} hours bitwise equal", checked_hours.len()))
}

fn aggregation_oracle() -> Result<String, String> {
    let t0 = Instant::now();
    let prices = prop::collection::vec(-600.0..3100.0f64, 200);
    let worst = Cell::new(0.0f64);
    runner(500)
        .run(&(fleet_strategy(), prices), |(fleet, mut prices)| {
            let curve = aggregate(&fleet).unwrap();
            // The exact bounds are where the aggregate kinks or jumps.
            prices.extend(fleet.iter().flat_map(|s| [s.bounds.low, s.bounds.high]));
            for p in prices {
                let want: f64 = fleet
                    .iter()
                    .map(|s| offered(s.cap, s.bounds.low, s.bounds.high, p))
                    .sum();
                let got = curve_invert(&curve, p);
                worst.set(worst.get().max((got - want).abs()));
                prop_assert!((got - want).abs() <= 1e-9, "p {}: aggregate {} vs sum {}", p, got, want);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    within(t0.elapsed(), 10.0, "500 fleets")?;
    Ok(format!("500 fleets x 200+ prices, max deviation {:.1e}", worst.get()))
}

fn round_trip_and_monotonicity() -> Result<String, String> {
    let worst = Cell::new(0.0f64);
    let segments = Cell::new(0usize);
    runner(1000)
        .run(&fleet_strategy(), |fleet| {
            let curve = aggregate(&fleet).unwrap();
            let pts = curve.points();
            for w in pts.windows(2) {
                let (a, b) = (w[0], w[1]);
                if a.q < b.q && a.p < b.p {
                    segments.set(segments.get() + 1);
                    for k in 1..10 {
                        let q = a.q + (b.q - a.q) * k as f64 / 10.0;
                        let back = curve_invert(&curve, curve_eval(&curve, q).unwrap());
                        worst.set(worst.get().max((back - q).abs()));
                        prop_assert!((back - q).abs() <= 1e-9, "q {} came back as {}", q, back);
                    }
                }
            }
            let total = curve.total_capacity();
            let mut last = f64::NEG_INFINITY;
            for k in 0..=400 {
                let p = curve_eval(&curve, total * k as f64 / 400.0).unwrap();
                prop_assert!(p >= last, "curve decreases");
                last = p;
            }
            let mut last = f64::NEG_INFINITY;
            for k in 0..=400 {
                let q = curve_invert(&curve, -600.0 + 3700.0 * k as f64 / 400.0);
                prop_assert!(q >= last, "inverse decreases");
                last = q;
            }
            let installed: f64 = fleet.iter().filter(|s| s.cap > 0.0).map(|s| s.cap).sum();
            prop_assert_eq!(curve_invert(&curve, PRICE_CAP), installed);
            prop_assert_eq!(total, installed);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "1000 fleets, {} sloped segments, max round-trip error {:.1e}",
        segments.get(),
        worst.get()
    ))
}

fn component_closure() -> Result<String, String> {
    let worst_sum = Cell::new(0.0f64);
    let worst_price = Cell::new(0.0f64);
    let breakpoints = Cell::new(0usize);
    runner(200)
        .run(&fleet_strategy(), |fleet| {
            if fleet.iter().all(|s| s.cap == 0.0) {
                return Ok(());
            }
            let curve = aggregate(&fleet).unwrap();
            for b in curve.points() {
                breakpoints.set(breakpoints.get() + 1);
                let dec = components_at(&fleet, &curve, b.q).unwrap();
                for seg in &dec.segments {
                    let sum: f64 = seg.fractions.iter().map(|f| f.1).sum();
                    worst_sum.set(worst_sum.get().max((sum - 1.0).abs()));
                    prop_assert!((sum - 1.0).abs() <= 1e-9, "fractions sum to {}", sum);
                }
                let total: f64 = dec.components.iter().map(|c| c.1).sum();
                let price = curve_eval(&curve, b.q).unwrap();
                worst_price.set(worst_price.get().max((total - price).abs()));
                prop_assert!((total - price).abs() <= 1e-9, "components {} vs price {}", total, price);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "200 fleets, {} breakpoints, max |sum f - 1| {:.1e}, max |sum comp - price| {:.1e}",
        breakpoints.get(),
        worst_sum.get(),
        worst_price.get()
    ))
}

fn synthetic_recovery() -> Result<String, String> {
    let expected = 5.0 * (2.0 / std::f64::consts::PI).sqrt();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for noise in [0.0, 5.0] {
        let spec = SynthSpec {
            price_noise: noise,
            ..SynthSpec::default()
        };
        let market = synthesize_market(&spec, 1).map_err(|e| e.to_string())?;
        let model = MeritOrderModel::new(&market.catalog, &market.panel).map_err(|e| e.to_string())?;
        let objective = Objective::train(&model).map_err(|e| e.to_string())?;
        let init = model.classical().with_groups(market.theta_star.active());
        for seed in 0..3 {
            let config = FitConfig {
                budget: 2000,
                seed,
                ..FitConfig::default()
            };
            let t0 = Instant::now();
            let result = fit(&objective, &init, &config).map_err(|e| e.to_string())?;
            let secs = t0.elapsed().as_secs_f64();
            let ok = if noise == 0.0 {
                result.train_mae <= 0.5
            } else {
                (result.train_mae - expected).abs() <= 0.1 * expected
            };
            let line = format!("sigma {noise} seed {seed}: MAE {:.3} in {secs:.1}s", result.train_mae);
            if !ok || secs >= 600.0 || result.eval_count > 2000 {
                failures.push(line.clone());
            }
            lines.push(line);
        }
    }
    if failures.is_empty() {
        Ok(format!("{} (target 0 / {expected:.3})", lines.join("; ")))
    } else {
        Err(format!("{}; all runs: {}", failures.join("; "), lines.join("; ")))
    }
}

fn runtime() -> Result<String, String> {
    let catalog = PlantCatalog::german_default();
    let panel = fleet_panel(&catalog, 8760, 3);
    let model = MeritOrderModel::new(&catalog, &panel).map_err(|e| e.to_string())?;
    // Every extension on, so all 14 stacks carry volume.
    let mut theta = model.classical().with_groups(GroupMask::all());
    let names: Vec<String> = theta.named_values().map(|(n, _)| n.to_string()).collect();
    for n in names.iter().filter(|n| n.starts_with("mr.")) {
        theta.set(n, 0.1).map_err(|e| e.to_string())?;
    }
    for (n, v) in [("gs", 0.4), ("cf.hydro", 1.0), ("cf.net_import", 1.0)] {
        theta.set(n, v).map_err(|e| e.to_string())?;
    }
    let hours: Vec<usize> = (0..8760).collect();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let (run, elapsed) = single.install(|| {
        let t0 = Instant::now();
        let run = model.price_series(&theta, &hours, Mode::Train, false);
        (run, t0.elapsed())
    });
    let run = run.map_err(|e| e.to_string())?;
    ensure(run.len() == 8760, || "price series has the wrong length".into())?;
    let hour = model.assemble_hour(&theta, 4000, Mode::Train).map_err(|e| e.to_string())?;
    let live = hour.stacks.iter().filter(|s| s.cap > 0.0).count();
    let empty: Vec<&str> = hour
        .stacks
        .iter()
        .zip(&hour.provenance)
        .filter(|(s, _)| s.cap <= 0.0)
        .map(|(_, i)| i.id.as_str())
        .collect();
    ensure(live == 14, || format!("{live} stacks carry volume, expected 14; empty: {empty:?}"))?;
    within(elapsed, 2.0, "price_series 8760 x 14")?;

    // Objective throughput against the 60-minute cap of a 3600-evaluation run.
    let objective = Objective::train(&model).map_err(|e| e.to_string())?;
    let cap_secs = 3600.0;
    let t0 = Instant::now();
    let result = fit(
        &objective,
        &theta,
        &FitConfig {
            budget: 48,
            max_seconds: Some(cap_secs),
            ..FitConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let per_eval = t0.elapsed().as_secs_f64() / result.eval_count as f64;
    let threads = rayon::current_num_threads();
    let projected = 3600.0 * per_eval;
    ensure(projected <= cap_secs, || {
        format!("3600 evaluations would take {projected:.0}s on {threads} thread(s), cap {cap_secs}s")
    })?;
    Ok(format!(
        "price_series {:.3}s single-threaded; {:.1} evaluations/s on {threads} thread(s), 3600 evaluations in about {:.0}s of the {cap_secs:.0}s cap",
        elapsed.as_secs_f64(),
        1.0 / per_eval,
        projected
    ))
}

fn soft(z: f64, gamma: f64) -> f64 {
    z.signum() * (z.abs() - gamma).max(0.0)
}

fn lasso_correctness() -> Result<String, String> {
    let config = LassoConfig::default();

    // Orthonormal design: Walsh columns of +-1 over 64 rows are centered,
    // have unit population variance and are mutually orthogonal, so every
    // coefficient is the soft-thresholded correlation with the target.
    let n = 64;
    let masks = [1usize, 2, 4, 8, 16, 32, 3, 5, 6, 7, 9, 12];
    let x: Vec<Vec<f64>> = masks
        .iter()
        .map(|&m| (0..n).map(|i| if (i & m).count_ones() % 2 == 0 { 1.0 } else { -1.0 }).collect())
        .collect();
    let beta = [3.0, -2.0, 1.5, 0.0, 0.0, 0.8, 0.0, -0.4, 0.0, 0.0, 0.2, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let y: Vec<f64> = (0..n)
        .map(|i| 10.0 + x.iter().zip(&beta).map(|(c, b)| b * c[i]).sum::<f64>() + rng.random_range(-0.5..0.5))
        .collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let path = lasso_path(&x, &y, &LambdaGrid::default(), &config).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for point in &path.points {
        for (j, col) in x.iter().enumerate() {
            let corr = col.iter().zip(&y).map(|(a, b)| a * (b - y_mean)).sum::<f64>() / n as f64;
            let want = soft(corr, point.lambda);
            worst = worst.max((point.coefficients[j] - want).abs());
        }
        worst = worst.max((point.intercept - y_mean).abs());
    }
    ensure(worst <= 1e-6, || format!("orthonormal path deviates by {worst:.2e}"))?;

    // Unpenalized fit against least squares with an intercept.
    let (n, p) = (200, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|j| (0..n).map(|_| rng.random_range(-1.0..1.0) * (j + 1) as f64).collect())
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|i| 5.0 + cols.iter().enumerate().map(|(j, c)| (j as f64 - 4.0) * c[i]).sum::<f64>() + rng.random_range(-1.0..1.0))
        .collect();
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
    let ols = design
        .clone()
        .svd(true, true)
        .solve(&DVector::from_vec(y.clone()), 1e-14)
        .map_err(|e| e.to_string())?;
    let unpenalized = lasso_fit(&cols, &y, &LambdaGrid::Values(vec![0.0]), &config).map_err(|e| e.to_string())?;
    let mut ols_gap = (unpenalized.intercept - ols[0]).abs();
    for j in 0..p {
        ols_gap = ols_gap.max((unpenalized.coefficients[j] - ols[j + 1]).abs());
    }
    ensure(ols_gap <= 1e-6, || format!("lambda = 0 deviates from least squares by {ols_gap:.2e}"))?;

    // Sparse recovery with the BIC-chosen penalty.
    let (n, p) = (2000, 40);
    let truth = [(3usize, 1.0), (11, -0.8), (17, 0.6), (25, -0.5), (38, 0.4)];
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut recovered = 0;
    let mut exact = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| normal.sample(&mut rng)).collect()).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| truth.iter().map(|&(j, b)| b * cols[j][i]).sum::<f64>() + normal.sample(&mut rng))
            .collect();
        let fit = lasso_fit(&cols, &y, &LambdaGrid::default(), &config).map_err(|e| e.to_string())?;
        let support = fit.support();
        if truth.iter().all(|t| support.contains(&t.0)) {
            recovered += 1;
            if support.len() == truth.len() {
                exact += 1;
            }
        }
    }
    ensure(recovered >= 18, || format!("BIC support contains the true features in {recovered}/20 seeds"))?;
    Ok(format!(
        "orthonormal path max error {worst:.1e} over {} points; OLS gap {ols_gap:.1e}; true support contained in {recovered}/20 (exact in {exact}/20)",
        path.points.len()
    ))
}

fn benchmark_exactness() -> Result<String, String> {
    let panel = panel_from(start(2024, 1, 1), 35, &[SeriesKey::Price], |_, d, h| (24 * d + h) as f64);
    let mut checked = 0;
    for d in 7..35 {
        let back = match panel.ts(24 * d).weekday() {
            Weekday::Mon | Weekday::Sat | Weekday::Sun => 7,
            _ => 1,
        };
        for h in 0..24 {
            let got = naive_price(&panel, d, h).map_err(|e| e.to_string())?;
            let want = (24 * (d - back) + h) as f64;
            ensure(got == want, || format!("naive day {d} hour {h}: {got}, expected {want}"))?;
            checked += 1;
        }
    }

    let catalog = PlantCatalog::new(vec![
        PlantType::conventional("gas", Fuel::Gas, 0.2),
        PlantType::conventional("coal", Fuel::Coal, 0.34),
    ])
    .map_err(|e| e.to_string())?;
    let data = random_panel(80, 21);
    let models = [
        ("expert", LinearForecaster::new(LinearSpec::expert(&data)).with_window(60)),
        ("hydro", LinearForecaster::new(LinearSpec::hydro()).with_window(60)),
        ("net_import", LinearForecaster::new(LinearSpec::net_import(&data, &catalog)).with_window(60)),
    ];
    for d in [40, 61, 79] {
        let poisoned = poison_future(&data, d, AVAILABLE_HOURS);
        for (name, m) in &models {
            let clean = m.forecast_day(&data, d).map_err(|e| e.to_string())?;
            let dirty = m.forecast_day(&poisoned, d).map_err(|e| e.to_string())?;
            ensure(clean == dirty, || format!("{name} reads values published after the cutoff for day {d}"))?;
        }
        for h in 0..24 {
            ensure(naive_price(&data, d, h).unwrap() == naive_price(&poisoned, d, h).unwrap(), || {
                format!("naive reads day {d}")
            })?;
        }
    }
    Ok(format!("{checked} naive hours exact; expert, hydro, net import invariant to poisoned future on 3 days"))
}

fn forward_selection() -> Result<String, String> {
    let spec = SynthSpec {
        hours: 24 * 21,
        plants: ["gas", "coal", "pv", "wind_onshore"].map(String::from).to_vec(),
        price_noise: 1.0,
        load: SeriesProfile {
            mean: 30_000.0,
            daily_amplitude: 6_000.0,
            noise: 1_000.0,
            ..SeriesProfile::default()
        },
        active_groups: GroupMask::empty()
            .with(ParamGroup::Efficiencies)
            .with(ParamGroup::Bids)
            .with(ParamGroup::CapFactors),
        theta: [("eta_low.gas", 0.3), ("eta_high.gas", 0.5), ("bid_low.pv", -100.0), ("cf.coal", 1.2)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        ..SynthSpec::default()
    };
    let market = synthesize_market(&spec, 4).map_err(|e| e.to_string())?;
    let model = MeritOrderModel::new(&market.catalog, &market.panel).map_err(|e| e.to_string())?;
    let objective = Objective::train(&model).map_err(|e| e.to_string())?;
    let groups = [ParamGroup::Efficiencies, ParamGroup::Bids, ParamGroup::CapFactors];
    let config = SelectConfig {
        fit: FitConfig {
            budget: 200,
            seed: 5,
            ..FitConfig::default()
        },
    };
    let tree = forward_select(&objective, None, &model.classical(), &groups, &config).map_err(|e| e.to_string())?;
    let per_level: Vec<usize> = (0..=tree.depth()).map(|l| tree.level(l).count()).collect();
    ensure(per_level == [1, 3, 2, 1], || format!("nodes per level {per_level:?}, expected [1, 3, 2, 1]"))?;
    ensure(tree.nodes.len() == 7, || format!("{} nodes", tree.nodes.len()))?;
    let path = tree.path();
    ensure(path.len() == 4, || format!("path has {} nodes", path.len()))?;
    for w in path.windows(2) {
        let (parent, chosen) = (w[0], w[1]);
        ensure(chosen.parent == Some(parent.id), || "path is not a parent chain".into())?;
        let best = tree
            .nodes
            .iter()
            .filter(|n| n.parent == Some(parent.id))
            .map(|n| n.train_mae)
            .fold(f64::INFINITY, f64::min);
        ensure(chosen.train_mae == best, || {
            format!("level {} chose MAE {} over sibling minimum {best}", chosen.level, chosen.train_mae)
        })?;
        ensure(chosen.train_mae <= parent.train_mae, || {
            format!("path MAE rises from {} to {}", parent.train_mae, chosen.train_mae)
        })?;
    }
    let maes: Vec<String> = path.iter().map(|n| format!("{:.3}", n.train_mae)).collect();
    Ok(format!("levels {per_level:?}, greedy path MAE {}", maes.join(" -> ")))
}

fn evaluation_recombination() -> Result<String, String> {
    let panel = random_panel(60, 13);
    let catalog = PlantCatalog::new(vec![PlantType::conventional("gas", Fuel::Gas, 0.2)])
        .map_err(|e| e.to_string())?;
    let days = 20..60;
    let naive = Benchmark::Naive.run(&panel, &catalog, days.clone(), 365).map_err(|e| e.to_string())?;
    let actual = naive.actual.clone().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noisy = ForecastRun::new(
        "noisy",
        naive.index.clone(),
        actual.iter().map(|a| a + rng.random_range(-30.0..30.0)).collect(),
        Some(actual.clone()),
    );
    let biased = ForecastRun::new(
        "biased",
        naive.index.clone(),
        actual.iter().map(|a| a * 1.1 + 3.0).collect(),
        Some(actual.clone()),
    );
    let runs = [naive.clone(), noisy, biased];
    let reports = evaluate_runs(&panel, &runs, 20).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for r in &reports {
        worst = worst.max((r.recombined_mae() - r.mae).abs());
    }
    ensure(worst <= 1e-9, || format!("bin recombination off by {worst:.2e}"))?;
    let self_skill = reports[0].skill;
    ensure(self_skill == Some(100.0), || format!("naive self-skill {self_skill:?}"))?;
    ensure(reports[0].mae == mae(&naive.predicted, &actual).unwrap(), || "naive MAE mismatch".into())?;

    let errors: Vec<f64> = naive.predicted.iter().zip(&actual).map(|(p, a)| p - a).collect();
    let flipped: Vec<f64> = errors.iter().map(|e| -e).collect();
    let cases = [
        ("pearson(e, e)", pearson(&errors, &errors), 1.0),
        ("pearson(e, -e)", pearson(&errors, &flipped), -1.0),
        ("dcor(e, e)", distance_correlation(&errors, &errors), 1.0),
        ("dcor(e, -e)", distance_correlation(&errors, &flipped), 1.0),
    ];
    for (name, got, want) in cases {
        let got = got.map_err(|e| e.to_string())?;
        ensure(got == want, || format!("{name} = {got:?}, expected {want}"))?;
    }
    Ok(format!(
        "3 models over {} hours, max recombination error {worst:.1e}; self-skill 100; correlation identities exact",
        actual.len()
    ))
}
