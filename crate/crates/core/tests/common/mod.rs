#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use underreport::ingest::{write_canonical, EpiWeek, StateDataset, WeekAxis};

pub const WEEKS_PER_YEAR: usize = 52;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, mean: f64, sd: f64) -> Vec<f64> {
    let d = Normal::new(mean, sd).unwrap();
    (0..n).map(|_| d.sample(rng)).collect()
}

/// `years` seasons of 52 weeks starting in 2009.
pub fn axis(years: usize) -> WeekAxis {
    WeekAxis::new(
        (0..years * WEEKS_PER_YEAR)
            .map(|k| EpiWeek::new(2009 + (k / WEEKS_PER_YEAR) as i32, (k % WEEKS_PER_YEAR) as u32 + 1)),
    )
}

/// Sinusoidal seasonal counts with Gaussian noise, rounded and never negative.
pub fn seasonal_series(rng: &mut ChaCha8Rng, n: usize, level: f64, amplitude: f64, sd: f64) -> Vec<f64> {
    let noise = gaussian(rng, n, 0.0, sd);
    (0..n)
        .map(|k| {
            let season = (2.0 * PI * k as f64 / WEEKS_PER_YEAR as f64).sin();
            (level + amplitude * season + noise[k]).max(0.0).round()
        })
        .collect()
}

/// Injected novelty over the last weeks of a seasonal series.
pub struct Injection {
    pub novelty: Vec<f64>,
    pub reported_fraction: f64,
}

impl Injection {
    pub fn reported(&self) -> Vec<f64> {
        self.novelty.iter().map(|v| v * self.reported_fraction).collect()
    }

    /// Injected (novelty, reported) counts at `scale`, rounded to whole counts.
    pub fn scaled(&self, scale: f64) -> (Vec<f64>, Vec<f64>) {
        let round = |v: Vec<f64>| v.into_iter().map(|x| (x * scale).round()).collect();
        (round(self.novelty.clone()), round(self.reported()))
    }

    /// Under-reporting rate implied by the injected counts at `scale`.
    pub fn true_rate(&self, scale: f64) -> f64 {
        let (novelty, reported) = self.scaled(scale);
        let eta: f64 = novelty.iter().sum();
        let cov: f64 = reported.iter().sum();
        (eta - cov) / cov
    }
}

pub const DEATHS_SCALE: f64 = 0.1;

/// Builds a dataset of `states`, each `years` long, with `injection` added
/// to the final weeks of both measures. Deaths are scaled by `DEATHS_SCALE`.
pub fn synthetic_dataset(seed: u64, states: &[&str], years: usize, injection: &Injection) -> StateDataset {
    let mut r = rng(seed);
    let n = years * WEEKS_PER_YEAR;
    let k = injection.novelty.len();
    let rows = states.iter().map(|code| {
        let mut build = |scale: f64| {
            let mut y = seasonal_series(&mut r, n, 200.0 * scale, 80.0 * scale, 5.0 * scale);
            let mut cov = vec![0.0; n];
            let (novelty, reported) = injection.scaled(scale);
            for j in 0..k {
                y[n - k + j] += novelty[j];
                cov[n - k + j] = reported[j];
            }
            (y, cov)
        };
        let (cases, cases_cov) = build(1.0);
        let (deaths, deaths_cov) = build(DEATHS_SCALE);
        (code.to_string(), [cases, cases_cov, deaths, deaths_cov])
    });
    StateDataset::from_series(axis(years), rows).unwrap()
}

pub fn default_injection() -> Injection {
    Injection {
        novelty: vec![100.0, 250.0, 450.0, 700.0, 1000.0, 1350.0, 1750.0],
        reported_fraction: 0.3,
    }
}

pub fn write_dataset(dataset: &StateDataset, path: &Path) {
    let file = std::fs::File::create(path).unwrap();
    write_canonical(dataset, file).unwrap();
}

/// Level shift of `shift` at 1-based index `at`, on top of N(offset, sd).
pub fn step_series(rng: &mut ChaCha8Rng, n: usize, at: usize, shift: f64, offset: f64, sd: f64) -> Vec<f64> {
    gaussian(rng, n, offset, sd)
        .into_iter()
        .enumerate()
        .map(|(k, v)| if k + 1 >= at { v + shift } else { v }.max(0.0))
        .collect()
}

/// Exact two-sided Wilcoxon p-value by walking all 2^m sign assignments.
/// Self-contained: ranks and zero handling are recomputed here.
pub fn brute_force_wilcoxon(a: &[f64], b: &[f64]) -> f64 {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let m = diffs.len();
    if m == 0 {
        return 1.0;
    }
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks: Vec<f64> = mags
        .iter()
        .map(|x| {
            let below = mags.iter().filter(|y| *y < x).count() as f64;
            let equal = mags.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let total: f64 = ranks.iter().sum();
    let observed_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let observed = observed_plus.min(total - observed_plus);
    let mut hits = 0u64;
    for mask in 0u64..(1 << m) {
        let plus: f64 = (0..m).filter(|j| mask >> j & 1 == 1).map(|j| ranks[j]).sum();
        if plus.min(total - plus) <= observed + 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << m) as f64
}
