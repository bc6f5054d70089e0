#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use merit_core::market_data::{Fuel, HourlyPanel, SeriesKey};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Large value written over hours that must not be read.
pub const SENTINEL: f64 = 1.0e12;

pub fn start(y: i32, m: u32, d: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap()
}

/// Build a day-aligned panel from a value function of `(key, day, hour)`.
pub fn panel_from(
    first: DateTime<Utc>,
    days: usize,
    keys: &[SeriesKey],
    f: impl Fn(&SeriesKey, usize, usize) -> f64,
) -> HourlyPanel {
    let n = 24 * days;
    let index = (0..n).map(|t| first + Duration::hours(t as i64)).collect();
    let series: BTreeMap<SeriesKey, Vec<f64>> = keys
        .iter()
        .map(|k| (k.clone(), (0..n).map(|t| f(k, t / 24, t % 24)).collect()))
        .collect();
    HourlyPanel::new(index, series).unwrap()
}

pub fn forecaster_keys() -> Vec<SeriesKey> {
    vec![
        SeriesKey::Price,
        SeriesKey::LoadDa,
        SeriesKey::ResDa("pv".into()),
        SeriesKey::ResDa("wind_onshore".into()),
        SeriesKey::ResDa("wind_offshore".into()),
        SeriesKey::Hydro,
        SeriesKey::NetImport,
        SeriesKey::Generation("gas".into()),
        SeriesKey::Generation("coal".into()),
        SeriesKey::FuelPrice(Fuel::Gas),
        SeriesKey::FuelPrice(Fuel::Coal),
        SeriesKey::FuelPrice(Fuel::Oil),
        SeriesKey::Eua,
        SeriesKey::ZoneLoadDa("FR".into()),
        SeriesKey::ZoneResDa("FR".into()),
    ]
}

/// A panel carrying every series the forecasters read, filled with
/// seeded noise around plausible levels.
pub fn random_panel(days: usize, seed: u64) -> HourlyPanel {
    let keys = forecaster_keys();
    let n = 24 * days;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: BTreeMap<SeriesKey, Vec<f64>> = keys
        .iter()
        .map(|k| (k.clone(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    panel_from(start(2023, 1, 2), days, &keys, |k, d, h| {
        let e = noise[k][24 * d + h];
        let daily = (2.0 * std::f64::consts::PI * h as f64 / 24.0).sin();
        match k {
            SeriesKey::Price => 80.0 + 20.0 * daily + 15.0 * e,
            SeriesKey::LoadDa => 55_000.0 + 8_000.0 * daily + 1_000.0 * e,
            SeriesKey::ResDa(_) => 6_000.0 + 3_000.0 * e,
            SeriesKey::Hydro => 1_800.0 + 150.0 * daily + 100.0 * e,
            SeriesKey::NetImport => 1_500.0 + 2_000.0 * e,
            SeriesKey::Generation(_) => 9_000.0 + 2_000.0 * e,
            SeriesKey::FuelPrice(_) | SeriesKey::Eua => 40.0 + 5.0 * noise[k][24 * d],
            _ => 20_000.0 + 2_000.0 * e,
        }
    })
}

/// Overwrite every value that is not yet known when day `d` is forecast:
/// auction prices from day `d`, day-ahead forecasts from day `d + 1`, fuel
/// and carbon prices from day `d - 1`, realized series from the cutoff
/// hour of day `d - 1`.
pub fn poison_future(panel: &HourlyPanel, d: usize, cutoff_hour: usize) -> HourlyPanel {
    let mut out = panel.clone();
    for (key, values) in panel.series() {
        let from = match key {
            SeriesKey::Price => 24 * d,
            k if k.is_day_ahead() => 24 * (d + 1),
            SeriesKey::FuelPrice(_) | SeriesKey::Eua => 24 * (d - 1),
            _ => 24 * (d - 1) + cutoff_hour,
        };
        let mut v = values.clone();
        for x in v.iter_mut().skip(from) {
            *x = SENTINEL;
        }
        out.set_series(key.clone(), v).unwrap();
    }
    out
}
