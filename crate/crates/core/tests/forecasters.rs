mod common;

use chrono::{Datelike, Weekday};
use common::*;
use merit_core::forecasters::*;
use merit_core::market_data::{Fuel, PlantCatalog, PlantType, SeriesKey};

fn catalog() -> PlantCatalog {
    PlantCatalog::new(vec![
        PlantType::conventional("gas", Fuel::Gas, 0.2),
        PlantType::conventional("coal", Fuel::Coal, 0.34),
    ])
    .unwrap()
}

#[test]
fn naive_rule_on_labeled_days() {
    // Price encodes its own (day, hour) so the source of every forecast is visible.
    let panel = panel_from(start(2024, 1, 1), 28, &[SeriesKey::Price], |_, d, h| (100 * d + h) as f64);
    for d in 7..28 {
        let wd = panel.ts(24 * d).weekday();
        let back = if matches!(wd, Weekday::Mon | Weekday::Sat | Weekday::Sun) { 7 } else { 1 };
        for h in 0..24 {
            assert_eq!(naive_price(&panel, d, h).unwrap(), (100 * (d - back) + h) as f64);
        }
    }
    // 2024-01-09 is a Tuesday, 2024-01-08 a Monday.
    assert_eq!(naive_price(&panel, 8, 5).unwrap(), 705.0);
    assert_eq!(naive_price(&panel, 7, 5).unwrap(), 5.0);
    assert!(matches!(naive_price(&panel, 6, 0), Err(ForecastError::InsufficientHistory { .. })));
}

#[test]
fn constant_series_forecast_their_constant() {
    let keys = forecaster_keys();
    let panel = panel_from(start(2023, 3, 1), 60, &keys, |k, d, h| match k {
        SeriesKey::Price => 42.0,
        SeriesKey::Hydro => 1234.0,
        SeriesKey::NetImport => 0.0,
        _ => 100.0 + ((d * 24 + h) % 7) as f64,
    });
    for d in [40, 59] {
        for h in [0, 11, 23] {
            assert!((naive_price(&panel, d, h).unwrap() - 42.0).abs() < 1e-12);
            assert!((expert_price(&panel, d, h).unwrap() - 42.0).abs() < 1e-9);
            assert!((hydro_forecast(&panel, d, h).unwrap() - 1234.0).abs() < 1e-9);
            assert!(net_import_forecast(&panel, &catalog(), d, h).unwrap().abs() < 1e-9);
        }
    }
}

#[test]
fn forecasts_ignore_unpublished_values() {
    let panel = random_panel(70, 5);
    let cat = catalog();
    let models = [
        LinearForecaster::new(LinearSpec::hydro()),
        LinearForecaster::new(LinearSpec::net_import(&panel, &cat)),
        LinearForecaster::new(LinearSpec::expert(&panel)).with_window(40),
    ];
    for d in [30, 45, 69] {
        let poisoned = poison_future(&panel, d, AVAILABLE_HOURS);
        for m in &models {
            let clean = m.forecast_day(&panel, d).unwrap();
            let dirty = m.forecast_day(&poisoned, d).unwrap();
            assert_eq!(clean, dirty, "{} reads data after the cutoff of day {d}", m.spec.name);
        }
        for h in 0..24 {
            assert_eq!(naive_price(&panel, d, h).unwrap(), naive_price(&poisoned, d, h).unwrap());
        }
    }
}

#[test]
fn poisoning_is_detected_when_a_feature_leaks() {
    // Same-hour lag 1 of a realized series is not known for afternoon hours.
    let panel = random_panel(60, 9);
    let mut spec = LinearSpec::hydro();
    spec.features.push(Feature::SameHour { series: SeriesKey::Hydro, lag: 1 });
    let m = LinearForecaster::new(spec);
    let poisoned = poison_future(&panel, 50, AVAILABLE_HOURS);
    let clean = m.forecast_day(&panel, 50).unwrap();
    let dirty = m.forecast_day(&poisoned, 50).unwrap();
    assert_eq!(clean[..AVAILABLE_HOURS], dirty[..AVAILABLE_HOURS]);
    assert_ne!(clean[AVAILABLE_HOURS..], dirty[AVAILABLE_HOURS..]);
}

#[test]
fn net_import_lags_follow_the_cutoff() {
    let spec = LinearSpec::net_import(&random_panel(20, 1), &catalog());
    let lag1 = Feature::CutoffLag { series: SeriesKey::NetImport, lag: 1 };
    assert!(spec.features.contains(&lag1));
    // Net import equals the day index, so the first lag reveals which day it read.
    let keys = forecaster_keys();
    let panel = panel_from(start(2023, 1, 2), 40, &keys, |k, d, h| match k {
        SeriesKey::NetImport => d as f64,
        _ => 1.0 + (h % 3) as f64,
    });
    let one = LinearSpec {
        name: "lag1".into(),
        target: SeriesKey::NetImport,
        timing: TargetTiming::Realized,
        features: vec![lag1],
        per_hour: true,
    };
    let mut m = LinearForecaster::new(one);
    m.grid = LambdaGrid::Values(vec![0.0]);
    let d = 30;
    // The target is the day index and the feature is the day it was read
    // from, so an unpenalized fit has slope 1 and intercept equal to the shift.
    let fit = m.fit_day(&panel, d).unwrap();
    assert!((fit.fits[10].intercept - 1.0).abs() < 1e-9, "{}", fit.fits[10].intercept);
    assert!((fit.fits[14].intercept - 2.0).abs() < 1e-9, "{}", fit.fits[14].intercept);
    for h in [10, 14] {
        let at = m.forecast_hour(&panel, d, h).unwrap();
        assert!((at - d as f64).abs() < 1e-9, "hour {h}: {at}");
    }
}

#[test]
fn hydro_weekly_pattern_beats_carry_forward() {
    let week = [1.0, 1.1, 0.95, 1.2, 0.9, 0.7, 0.6];
    let keys = [SeriesKey::Hydro];
    let panel = panel_from(start(2023, 1, 2), 140, &keys, |_, d, h| {
        2000.0 * week[d % 7] + 100.0 * (h as f64 / 4.0).sin()
    });
    let m = LinearForecaster::new(LinearSpec::hydro());
    let days = 100..140;
    let pred = m.forecast_days(&panel, days.clone()).unwrap();
    let obs = &panel.get(&SeriesKey::Hydro).unwrap()[24 * days.start..24 * days.end];
    let model_mae = pred.iter().zip(obs).map(|(p, a)| (p - a).abs()).sum::<f64>() / obs.len() as f64;
    let carry: Vec<f64> = (24 * days.start..24 * days.end)
        .map(|t| panel.get(&SeriesKey::Hydro).unwrap()[t - 24])
        .collect();
    let naive_mae = carry.iter().zip(obs).map(|(p, a)| (p - a).abs()).sum::<f64>() / obs.len() as f64;
    assert!(model_mae < 0.1 * naive_mae, "model {model_mae} naive {naive_mae}");
}

#[test]
fn persistent_negative_net_import_stays_negative() {
    let keys = forecaster_keys();
    let panel = panel_from(start(2023, 1, 2), 80, &keys, |k, d, h| match k {
        SeriesKey::NetImport => -3000.0 - 500.0 * ((d % 7) as f64 / 7.0) - 20.0 * h as f64,
        SeriesKey::LoadDa => 50_000.0 + 100.0 * ((d * 7 + h) % 11) as f64,
        _ => 100.0 + ((d * 5 + h) % 13) as f64,
    });
    let m = LinearForecaster::new(LinearSpec::net_import(&panel, &catalog()));
    let pred = m.forecast_days(&panel, 60..80).unwrap();
    assert!(pred.iter().all(|v| *v < 0.0));
}

#[test]
fn expert_recovers_a_linear_fuel_rule() {
    let keys = forecaster_keys();
    let gas = |d: usize| 30.0 + 10.0 * (d as f64 / 9.0).sin() + 3.0 * ((d * 37 % 11) as f64 / 11.0);
    let panel = panel_from(start(2023, 1, 2), 400, &keys, |k, d, _| match k {
        SeriesKey::Price => {
            if d >= 2 {
                2.0 * gas(d - 2)
            } else {
                60.0
            }
        }
        SeriesKey::FuelPrice(Fuel::Gas) => gas(d),
        _ => 10.0,
    });
    let error = |window: usize| {
        let m = LinearForecaster::new(LinearSpec::expert(&panel)).with_window(window);
        let days = 380..400;
        let pred = m.forecast_days(&panel, days.clone()).unwrap();
        let obs = &panel.get(&SeriesKey::Price).unwrap()[24 * days.start..24 * days.end];
        pred.iter().zip(obs).map(|(p, a)| (p - a).abs()).sum::<f64>() / obs.len() as f64
    };
    let short = error(30);
    let long = error(365);
    assert!(long < 0.05, "window 365: {long}");
    assert!(long <= short + 1e-9, "window 30: {short}, window 365: {long}");
}

#[test]
fn benchmark_runs_cover_the_requested_days() {
    let panel = random_panel(50, 2);
    let run = Benchmark::Naive.run(&panel, &catalog(), 40..50, 365).unwrap();
    assert_eq!(run.len(), 240);
    assert_eq!(run.actual.as_ref().unwrap()[0], panel.get(&SeriesKey::Price).unwrap()[960]);
    let hydro = Benchmark::Hydro.run(&panel, &catalog(), 45..47, 365).unwrap();
    assert_eq!(hydro.model, "hydro");
    assert_eq!(hydro.len(), 48);
    let fitted = LinearForecaster::new(LinearSpec::hydro()).fit_day(&panel, 45).unwrap();
    let text = serde_json::to_string(&fitted).unwrap();
    assert_eq!(serde_json::from_str::<FittedDay>(&text).unwrap(), fitted);
}

#[test]
fn history_requirements() {
    let panel = random_panel(30, 3);
    let m = LinearForecaster::new(LinearSpec::hydro());
    assert!(matches!(m.forecast_day(&panel, 10), Err(ForecastError::InsufficientHistory { .. })));
    assert!(matches!(m.forecast_day(&panel, 30), Err(ForecastError::DayOutOfRange { .. })));
}
