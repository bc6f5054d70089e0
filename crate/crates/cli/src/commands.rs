//! One function per subcommand. Each reads its inputs, runs the core
//! library and writes its outputs below the configured output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

use merit_core::estimation::{fit, forward_select, Objective, SelectConfig};
use merit_core::evaluation::{error_correlations, evaluate_runs, reports_table, write_reports_csv};
use merit_core::forecasters::{Benchmark, LinearForecaster, LinearSpec};
use merit_core::market_data::{load_panel, synthesize_market, write_panel, HourlyPanel, PanelSchema, PlantCatalog};
use merit_core::stack_assembly::{MeritOrderModel, Mode, ParamGroup, ParameterSet};
use merit_core::ForecastRun;

use crate::config::{LoadedConfig, RunConfig};
use crate::error::CliError;

struct Inputs {
    catalog: PlantCatalog,
    panel: HourlyPanel,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(fail)?;
    }
    fs::write(path, contents).map_err(fail)
}

fn write_run(path: &Path, run: &ForecastRun) -> Result<(), CliError> {
    let mut buf = Vec::new();
    run.write_csv(&mut buf).map_err(|e| CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    write_file(path, buf)
}

fn load_catalog(cfg: &LoadedConfig) -> Result<PlantCatalog, CliError> {
    match &cfg.config.catalog {
        None => Ok(PlantCatalog::german_default()),
        Some(p) => {
            let path = cfg.resolve(p);
            let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Ok(PlantCatalog::from_json(&text)?)
        }
    }
}

fn load_inputs(cfg: &LoadedConfig) -> Result<Inputs, CliError> {
    cfg.check_files()?;
    let schema_path = cfg
        .config
        .schema
        .as_ref()
        .map(|p| cfg.resolve(p))
        .ok_or_else(|| CliError::Config("no panel schema configured (`schema`)".into()))?;
    let schema = PanelSchema::read(&schema_path)?;
    let schema_dir = schema_path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let mut paths = schema.default_paths(&schema_dir);
    for (group, p) in &cfg.config.data {
        paths.insert(group.clone(), cfg.resolve(p));
    }
    let loaded = load_panel(&paths, &schema)?;
    let filled = loaded.report.filled.len();
    if filled > 0 {
        eprintln!("data: {filled} missing hours filled from the previous hour");
    }
    Ok(Inputs {
        catalog: load_catalog(cfg)?,
        panel: loaded.panel,
    })
}

/// First test hour, or the panel length when no test period is set.
fn cut_hour(cfg: &LoadedConfig, panel: &HourlyPanel) -> Result<usize, CliError> {
    match cfg.config.test_start {
        None => Ok(panel.len()),
        Some(ts) => panel
            .position(ts)
            .filter(|&t| t > 0)
            .ok_or_else(|| CliError::Config(format!("test_start {ts} is not inside the panel"))),
    }
}

fn test_hours(cfg: &LoadedConfig, panel: &HourlyPanel) -> Result<Range<usize>, CliError> {
    if cfg.config.test_start.is_none() {
        return Err(CliError::Config("this command needs a test period (`test_start`)".into()));
    }
    Ok(cut_hour(cfg, panel)?..panel.len())
}

fn first_test_day(cfg: &LoadedConfig, panel: &HourlyPanel) -> Result<usize, CliError> {
    let cut = test_hours(cfg, panel)?.start;
    if cut % 24 != 0 || !panel.is_day_aligned() {
        return Err(CliError::Config("test_start must be a midnight of a day-aligned panel".into()));
    }
    Ok(cut / 24)
}

/// Attach hydro and net-import forecasts for the test period when the
/// virtual plants can carry volume.
fn with_input_forecasts<'a>(
    model: MeritOrderModel<'a>,
    cfg: &LoadedConfig,
    inputs: &'a Inputs,
    hydro: bool,
    net_import: bool,
) -> Result<MeritOrderModel<'a>, CliError> {
    if !hydro && !net_import {
        return Ok(model);
    }
    let from = first_test_day(cfg, &inputs.panel)?;
    let windows = &cfg.config.windows;
    let mut model = model;
    if hydro {
        let f = LinearForecaster::new(LinearSpec::hydro()).with_window(windows.hydro);
        model = model.with_hydro_forecast(f.forecast_series(&inputs.panel, from)?)?;
    }
    if net_import {
        let spec = LinearSpec::net_import(&inputs.panel, &inputs.catalog);
        let f = LinearForecaster::new(spec).with_window(windows.net_import);
        model = model.with_net_import_forecast(f.forecast_series(&inputs.panel, from)?)?;
    }
    Ok(model)
}

fn virtual_share(theta: &ParameterSet, name: &str) -> bool {
    theta.get(name).is_some_and(|v| v != 0.0)
}

pub fn fit_cmd(cfg: &LoadedConfig) -> Result<(), CliError> {
    let fit_config = cfg.fit_config()?;
    let inputs = load_inputs(cfg)?;
    let cut = cut_hour(cfg, &inputs.panel)?;
    let train = inputs.panel.slice(0..cut);
    let model = MeritOrderModel::new(&inputs.catalog, &train)?;
    let init = model.classical().with_groups(cfg.config.group_mask());
    let objective = Objective::train(&model)?;
    let started = Instant::now();
    let result = fit(&objective, &init, &fit_config)?;
    eprintln!(
        "fit: {} evaluations, {} restarts, train MAE {:.4} in {:.1}s",
        result.eval_count,
        result.restarts,
        result.train_mae,
        started.elapsed().as_secs_f64()
    );

    let out = cfg.out_dir();
    write_file(&out.join("theta.json"), result.theta_hat.to_json())?;
    write_file(&out.join("fit.json"), result.to_json())?;
    write_file(&out.join("trace.csv"), result.trace_csv())?;

    let mut summary = String::new();
    let _ = writeln!(summary, "groups       {}", result.theta_hat.active());
    let _ = writeln!(summary, "seed         {}", result.seed);
    let _ = writeln!(summary, "evaluations  {} of {}", result.eval_count, fit_config.budget);
    let _ = writeln!(summary, "restarts     {}", result.restarts);
    let _ = writeln!(summary, "train hours  {}", objective.hours().len());
    let _ = writeln!(summary, "train_mae    {}", result.train_mae);
    let _ = writeln!(summary, "\n{:<28} {:>12} {:>12}", "parameter", "value", "initial");
    let layout = result.theta_hat.layout();
    for (spec, value) in layout.specs().iter().zip(result.theta_hat.values()) {
        if result.theta_hat.active().contains(spec.group) {
            let _ = writeln!(summary, "{:<28} {:>12.5} {:>12.5}", spec.name, value, spec.init);
        }
    }
    write_file(&out.join("summary.txt"), summary)
}

fn read_theta(catalog: &PlantCatalog, path: &Path) -> Result<ParameterSet, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::InvalidTheta(format!("{}: {e}", path.display())))?;
    let theta = ParameterSet::from_json(catalog, &text).map_err(|e| CliError::InvalidTheta(e.to_string()))?;
    if !theta.in_box() {
        return Err(CliError::InvalidTheta("a parameter lies outside its box".into()));
    }
    Ok(theta)
}

pub fn forecast_cmd(cfg: &LoadedConfig, theta_path: Option<&Path>) -> Result<(), CliError> {
    let inputs = load_inputs(cfg)?;
    let out = cfg.out_dir();
    let theta_path = theta_path.map_or_else(|| out.join("theta.json"), Path::to_path_buf);
    let theta = read_theta(&inputs.catalog, &theta_path)?;
    let hours: Vec<usize> = test_hours(cfg, &inputs.panel)?.collect();
    let model = MeritOrderModel::new(&inputs.catalog, &inputs.panel)?;
    let model = with_input_forecasts(
        model,
        cfg,
        &inputs,
        virtual_share(&theta, "cf.hydro"),
        virtual_share(&theta, "cf.net_import"),
    )?;
    let run = model.price_series(&theta, &hours, Mode::Test, cfg.config.decompose)?;
    write_run(&out.join("forecast.csv"), &run)?;

    let mut curves = String::from("ts,q,p,technology\n");
    for ts in &cfg.config.curve_hours {
        let t = inputs
            .panel
            .position(*ts)
            .ok_or_else(|| CliError::Config(format!("curve hour {ts} is not inside the panel")))?;
        for row in model.curve_dump(&theta, &[t], Mode::Test)? {
            let _ = writeln!(curves, "{},{},{},{}", ts.to_rfc3339(), row.q, row.p, row.plant);
        }
    }
    write_file(&out.join("curves.csv"), curves)?;

    if let Some(dec) = &run.decomposition {
        write_file(&out.join("marginal_mix.csv"), marginal_mix(&run, &dec.atm))?;
    }

    let mut switches = String::from("ts,ranking,switched\n");
    let mut previous: Option<Vec<String>> = None;
    let mut count = 0;
    for &t in &hours {
        let ranking = model.cost_ranking(&theta, t, Mode::Test)?;
        let switched = previous.as_ref().is_some_and(|p| order_changed(p, &ranking));
        count += usize::from(switched);
        let _ = writeln!(
            switches,
            "{},{},{}",
            inputs.panel.ts(t).to_rfc3339(),
            ranking.join("<"),
            u8::from(switched)
        );
        previous = Some(ranking);
    }
    write_file(&out.join("fuel_switches.csv"), switches)?;
    eprintln!("forecast: {} hours, {count} fuel switches", hours.len());
    Ok(())
}

/// Whether any two technologies ranked in both hours swapped places.
pub fn order_changed(before: &[String], after: &[String]) -> bool {
    let common: BTreeSet<&String> = before.iter().filter(|t| after.contains(t)).collect();
    let a: Vec<&String> = before.iter().filter(|t| common.contains(t)).collect();
    let b: Vec<&String> = after.iter().filter(|t| common.contains(t)).collect();
    a != b
}

/// Daily mean forecast price and share of hours each technology was at
/// the money.
fn marginal_mix(run: &ForecastRun, atm: &[String]) -> String {
    let techs: BTreeSet<&str> = atm.iter().map(String::as_str).collect();
    let mut days: BTreeMap<chrono::NaiveDate, (Vec<f64>, BTreeMap<&str, usize>)> = BTreeMap::new();
    for ((ts, p), a) in run.index.iter().zip(&run.predicted).zip(atm) {
        let day = days.entry(ts.date_naive()).or_default();
        day.0.push(*p);
        *day.1.entry(a.as_str()).or_default() += 1;
    }
    let mut out = String::from("date,hours,mean_price");
    for t in &techs {
        let _ = write!(out, ",share.{t}");
    }
    out.push('\n');
    for (date, (prices, counts)) in days {
        let n = prices.len();
        let _ = write!(out, "{date},{n},{}", prices.iter().sum::<f64>() / n as f64);
        for t in &techs {
            let _ = write!(out, ",{}", counts.get(t).copied().unwrap_or(0) as f64 / n as f64);
        }
        out.push('\n');
    }
    out
}

pub fn select_cmd(cfg: &LoadedConfig) -> Result<(), CliError> {
    let fit_config = cfg.fit_config()?;
    if cfg.config.groups.is_empty() {
        return Err(CliError::Config("select needs at least one group (`groups`)".into()));
    }
    let inputs = load_inputs(cfg)?;
    let cut = cut_hour(cfg, &inputs.panel)?;
    let train = inputs.panel.slice(0..cut);
    let train_model = MeritOrderModel::new(&inputs.catalog, &train)?;
    let train_objective = Objective::train(&train_model)?;

    let virtuals = cfg.config.groups.contains(&ParamGroup::Virtuals);
    let test_model = if cfg.config.test_start.is_some() {
        let m = MeritOrderModel::new(&inputs.catalog, &inputs.panel)?;
        Some(with_input_forecasts(m, cfg, &inputs, virtuals, virtuals)?)
    } else {
        None
    };
    let test_objective = match &test_model {
        Some(m) => Some(Objective::new(m, test_hours(cfg, &inputs.panel)?.collect(), Mode::Test)?),
        None => None,
    };
    let started = Instant::now();
    let tree = forward_select(
        &train_objective,
        test_objective.as_ref(),
        &train_model.classical(),
        &cfg.config.groups,
        &SelectConfig { fit: fit_config },
    )?;
    eprintln!("select: {} nodes in {:.1}s", tree.nodes.len(), started.elapsed().as_secs_f64());
    let out = cfg.out_dir();
    write_file(&out.join("tree.json"), tree.to_json())?;
    write_file(&out.join("tree.txt"), tree.to_text())
}

pub fn benchmarks_cmd(cfg: &LoadedConfig) -> Result<(), CliError> {
    let inputs = load_inputs(cfg)?;
    let first = first_test_day(cfg, &inputs.panel)?;
    let days = first..inputs.panel.days();
    let out = cfg.out_dir().join("benchmarks");
    let windows = &cfg.config.windows;
    for &b in &cfg.config.benchmarks {
        let window = match b {
            Benchmark::Naive | Benchmark::Expert => windows.expert,
            Benchmark::Hydro => windows.hydro,
            Benchmark::NetImport => windows.net_import,
        };
        let started = Instant::now();
        let run = b.run(&inputs.panel, &inputs.catalog, days.clone(), window)?;
        write_run(&out.join(format!("{}.csv", b.as_str())), &run)?;
        eprintln!("benchmarks: {} over {} days in {:.1}s", b.as_str(), days.len(), started.elapsed().as_secs_f64());
    }
    Ok(())
}

pub fn evaluate_cmd(cfg: &LoadedConfig, files: &[PathBuf], skill: bool) -> Result<(), CliError> {
    if files.is_empty() {
        return Err(CliError::Config("evaluate needs at least one run file".into()));
    }
    let runs = files
        .iter()
        .map(|path| {
            let name = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            let err = |source| CliError::RunFile {
                path: path.display().to_string(),
                source,
            };
            let file = File::open(path).map_err(|e| err(e.into()))?;
            ForecastRun::read_csv(&name, file).map_err(err)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if skill && !runs.iter().any(|r| r.model == "naive") {
        return Err(CliError::MissingNaiveRun);
    }
    let inputs = load_inputs(cfg)?;
    let reports = evaluate_runs(&inputs.panel, &runs, cfg.config.n_bins)?;
    let out = cfg.out_dir();
    let mut csv = Vec::new();
    write_reports_csv(&reports, &mut csv)?;
    write_file(&out.join("metrics.csv"), csv)?;
    write_file(&out.join("metrics.txt"), reports_table(&reports))?;
    if runs.len() >= 2 {
        let corr = error_correlations(&runs)?;
        write_file(&out.join("correlations.txt"), corr.to_text())?;
        write_file(
            &out.join("correlations.json"),
            serde_json::to_string_pretty(&corr).expect("matrix serializes"),
        )?;
    }
    eprint!("{}", reports_table(&reports));
    Ok(())
}

pub fn synth_cmd(cfg: &LoadedConfig) -> Result<(), CliError> {
    let seed = cfg.require_seed()?;
    let spec = &cfg.config.synth;
    let market = synthesize_market(spec, seed)?;
    let out = cfg.out_dir();
    write_panel(&market.panel, &out.join("data"))?;
    write_file(&out.join("catalog.json"), market.catalog.to_json())?;
    write_file(&out.join("theta_star.json"), market.theta_star.to_json())?;

    // A config that runs every other command on the generated market.
    let days = market.panel.len() / 24;
    let test_start = (days >= 2).then(|| market.panel.ts(24 * (days - days / 4).min(days - 1)));
    let run = RunConfig {
        schema: Some("data/schema.json".into()),
        data: BTreeMap::new(),
        catalog: Some("catalog.json".into()),
        test_start,
        groups: market.theta_star.active().iter().collect(),
        seed: Some(seed),
        benchmarks: (cfg.config.benchmarks.iter().copied())
            .filter(|b| market.panel.get(&b.target()).is_some())
            .collect(),
        curve_hours: Vec::new(),
        out: "results".into(),
        ..cfg.config.clone()
    };
    write_file(&out.join("config.json"), run.to_json())?;
    eprintln!("synth: {} hours, {} plants written to {}", market.panel.len(), market.catalog.plants().len(), out.display());
    Ok(())
}
