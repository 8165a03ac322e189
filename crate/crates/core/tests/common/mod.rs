#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use atlo::ingest::{AlignedFrame, Column};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const NATIVE_STEP: i64 = 60;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn frame(step: i64, cols: Vec<(&str, Vec<f64>)>) -> AlignedFrame {
    let n = cols[0].1.len();
    AlignedFrame::new(
        step,
        (0..n as i64).map(|k| k * step).collect(),
        cols.into_iter()
            .map(|(id, values)| Column {
                sensor_id: id.to_string(),
                measurement_type: "x".to_string(),
                values,
            })
            .collect(),
    )
    .unwrap()
}

/// Driver `x` is uniform noise; `y` at native row n is the mean of `x` over the
/// `l_star` rows `n - k_star, n - 2 k_star, ...`. Sampled every `k_star` rows, the next
/// `y` is therefore exactly the mean of the last `l_star` samples of `x`.
pub fn lagged_mean_frame(seed: u64, k_star: usize, l_star: usize, n_rows: usize) -> AlignedFrame {
    let mut r = rng(seed);
    let burn = k_star * l_star;
    let x: Vec<f64> = (0..n_rows + burn)
        .map(|_| r.random::<f64>() * 10.0)
        .collect();
    let y: Vec<f64> = (burn..n_rows + burn)
        .map(|n| (1..=l_star).map(|l| x[n - l * k_star]).sum::<f64>() / l_star as f64)
        .collect();
    frame(NATIVE_STEP, vec![("x", x[burn..].to_vec()), ("y", y)])
}

pub const FEATURES: [(&str, &str); 6] = [
    ("pm25", "pm"),
    ("pm10", "pm"),
    ("co2", "gas"),
    ("voc", "gas"),
    ("temperature", "climate"),
    ("humidity", "climate"),
];

struct Ar1 {
    phi: f64,
    scale: f64,
    state: f64,
}

impl Ar1 {
    fn new(phi: f64, sd: f64) -> Self {
        Self {
            phi,
            scale: sd * (1.0 - phi * phi).sqrt(),
            state: 0.0,
        }
    }

    fn step(&mut self, r: &mut ChaCha8Rng) -> f64 {
        let e: f64 = StandardNormal.sample(r);
        self.state = self.phi * self.state + self.scale * e;
        self.state
    }
}

fn lag_mean(series: &[f64], n: usize, every: usize, count: usize) -> f64 {
    (1..=count)
        .map(|l| series[n.saturating_sub(l * every)])
        .sum::<f64>()
        / count as f64
}

/// Minute-resolution indoor air-quality style readings with planted lag
/// structure: each feature mixes a daily cycle, a persistent latent process and
/// the mean of another feature over a fixed number of lagged samples. Returns
/// the wide series in `FEATURES` order.
pub fn air_quality_series(seed: u64, days: usize) -> Vec<Vec<f64>> {
    let n = days * 1440;
    let mut r = rng(seed);
    let mut occupancy = Ar1::new(0.995, 1.0);
    let mut dust = Ar1::new(0.99, 1.0);
    let mut weather = Ar1::new(0.9995, 1.0);
    let mut damp = Ar1::new(0.998, 1.0);
    let mut f = vec![vec![0.0; n]; 6];
    let noise = |r: &mut ChaCha8Rng, sd: f64| sd * Distribution::<f64>::sample(&StandardNormal, r);
    let mut occ = vec![0.0; n];
    for t in 0..n {
        let day = (2.0 * std::f64::consts::PI * t as f64 / 1440.0).sin();
        let day_late = (2.0 * std::f64::consts::PI * (t as f64 - 120.0) / 1440.0).sin();
        occ[t] = (occupancy.step(&mut r) + 0.8 * day).max(-1.5);

        let temp = 22.0 + 2.0 * day_late + 0.6 * weather.step(&mut r) + noise(&mut r, 0.05);
        let hum = 45.0 - 4.0 * day + 3.0 * damp.step(&mut r)
            - 0.8 * (lag_mean(&f[4], t, 20, 3) - 22.0)
            + noise(&mut r, 0.3);
        let co2 = 600.0 + 120.0 * lag_mean(&occ, t, 10, 6) + noise(&mut r, 8.0);
        let voc = 120.0
            + 0.3 * (lag_mean(&f[2], t, 15, 4) - 600.0)
            + 10.0 * dust.step(&mut r)
            + noise(&mut r, 4.0);
        let pm25 = (12.0
            + 4.0 * dust.state
            + 0.4 * (lag_mean(&f[5], t, 30, 2) - 45.0)
            + noise(&mut r, 0.8))
        .max(0.5);
        let pm10 = 1.6 * lag_mean(&f[0], t, 5, 3) + 3.0 + noise(&mut r, 1.0);
        f[0][t] = pm25;
        f[1][t] = pm10.max(0.5);
        f[2][t] = co2;
        f[3][t] = voc.max(1.0);
        f[4][t] = temp;
        f[5][t] = hum;
    }
    f
}

/// Writes the long-format input file: the six features, a constant sensor,
/// an irrelevant diagnostic sensor, a few dropped readings and a few explicit
/// gaps. Returns the number of data lines.
pub fn write_air_quality_csv(path: &Path, seed: u64, days: usize) -> usize {
    let series = air_quality_series(seed, days);
    let mut r = rng(seed ^ 0x5eed);
    let t0: i64 = 1_700_000_000 / 86_400 * 86_400;
    let mut out = String::from("timestamp,sensor_id,measurement_type,value\n");
    let mut lines = 0;
    for t in 0..series[0].len() {
        let ts = t0 + t as i64 * NATIVE_STEP;
        for (j, (id, kind)) in FEATURES.iter().enumerate() {
            let u: f64 = r.random();
            if t > 0 && u < 0.002 {
                continue;
            }
            if t > 0 && u < 0.003 {
                writeln!(out, "{ts},{id},{kind},").unwrap();
            } else {
                writeln!(out, "{ts},{id},{kind},{}", series[j][t]).unwrap();
            }
            lines += 1;
        }
        writeln!(out, "{ts},door_state,climate,1").unwrap();
        writeln!(out, "{ts},battery,diagnostic,{}", 3.7 - t as f64 * 1e-6).unwrap();
        lines += 2;
    }
    std::fs::write(path, out).unwrap();
    lines
}
