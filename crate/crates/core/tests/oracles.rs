//! Worked examples checked against independent, deliberately naive oracles.

mod common;

use common::*;
use underreport::detect::{adaptive_noise, adaptive_normalization, change_finder, change_finder_scores};
use underreport::novelty::{
    build_baseline, novelty_series, pre_novelty_noise, rate_with_margin, BootstrapConfig, NoiseSummary,
};
use underreport::stats::{
    boxplot_outliers, bootstrap_mean_ci, quartiles, wilcoxon_signed_rank, Alternative, MeanCI,
    DEFAULT_FENCE_K,
};
use underreport::timeseries::{moving_average, AverageKind, AverageSpec, Measure, SeriesLabel, TimeSeries};

fn series(values: Vec<f64>) -> TimeSeries {
    TimeSeries::new(SeriesLabel::new("XX", Measure::Cases), values).unwrap()
}

/// Type-7 quantile: h = (n-1)q, interpolate between floor(h) and ceil(h).
fn naive_quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn naive_outliers(xs: &[f64], k: f64) -> Vec<usize> {
    let (q1, q3) = (naive_quantile(xs, 0.25), naive_quantile(xs, 0.75));
    let iqr = q3 - q1;
    (0..xs.len())
        .filter(|&j| xs[j] < q1 - k * iqr || xs[j] > q3 + k * iqr)
        .collect()
}

#[test]
fn exponential_average_matches_direct_expansion() {
    // weights (1 - 2/(p+1))^(p-k) for p = 3: 0.25, 0.5, 1
    let expected = (0.25 * 1.0 + 0.5 * 2.0 + 1.0 * 3.0) / (0.25 + 0.5 + 1.0);
    let got = moving_average(&[1.0, 2.0, 3.0], 3, AverageSpec::exponential(3).unwrap()).unwrap();
    assert!((got - expected).abs() < 1e-15);
    assert!((got - 2.428_571_428_571_428_5).abs() < 1e-12);
}

#[test]
fn seasonal_exponential_p4_matches_hand_value() {
    // (1,2,3,4) at seasonal lags of week 5*s
    let s = 3;
    let mut y = vec![50.0; 5 * s];
    for (k, v) in [1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
        y[(k + 1) * s - 1] = v;
    }
    let spec = AverageSpec::seasonal(4, s, AverageKind::Exponential).unwrap();
    let got = moving_average(&y, 4 * s, spec).unwrap();
    let expected = (0.216 * 1.0 + 0.36 * 2.0 + 0.6 * 3.0 + 4.0) / 2.176;
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    assert!((got - 3.0956).abs() < 1e-4);

    let baseline = build_baseline(&series(y), 4, s, 5 * s..=5 * s).unwrap();
    assert!((baseline.get(5 * s).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn quartiles_use_linear_interpolation() {
    assert_eq!(quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), (2.0, 4.0));
    let xs = [3.0, 9.0, 1.0, 7.0];
    let (q1, q3) = quartiles(&xs).unwrap();
    assert!((q1 - naive_quantile(&xs, 0.25)).abs() < 1e-15);
    assert!((q3 - naive_quantile(&xs, 0.75)).abs() < 1e-15);
}

#[test]
fn boxplot_flags_exactly_the_spike() {
    let mut r = rng(11);
    let mut xs = gaussian(&mut r, 100, 0.0, 1.0);
    xs.push(1e6);
    let got = boxplot_outliers(&xs, DEFAULT_FENCE_K).unwrap();
    assert_eq!(got, naive_outliers(&xs, DEFAULT_FENCE_K));
    assert_eq!(got, vec![100]);
}

#[test]
fn boxplot_matches_naive_fence_on_random_samples() {
    let mut r = rng(12);
    for n in 1..60 {
        let xs = gaussian(&mut r, n, 5.0, 3.0);
        let mut heavy = xs.clone();
        heavy.iter_mut().step_by(7).for_each(|v| *v *= 20.0);
        for sample in [&xs, &heavy] {
            assert_eq!(boxplot_outliers(sample, 1.5).unwrap(), naive_outliers(sample, 1.5));
            assert_eq!(boxplot_outliers(sample, 3.0).unwrap(), naive_outliers(sample, 3.0));
        }
    }
}

#[test]
fn wilcoxon_constant_shift_of_seven() {
    let b: Vec<f64> = (1..=7).map(|v| v as f64 * 3.0).collect();
    let a: Vec<f64> = b.iter().map(|v| v + 10.0).collect();
    let res = wilcoxon_signed_rank(&a, &b, 0.05, Alternative::TwoSided).unwrap();
    assert!(res.exact);
    assert_eq!(res.p_value, 2.0 / 128.0);
    assert_eq!(brute_force_wilcoxon(&a, &b), 2.0 / 128.0);
    assert!(res.significant);
}

#[test]
fn wilcoxon_exact_matches_enumeration() {
    let mut r = rng(13);
    for m in 1..=12 {
        for _ in 0..20 {
            let a = gaussian(&mut r, m, 0.5, 1.0);
            // rounding creates ties among magnitudes and some zero differences
            let a: Vec<f64> = a.iter().map(|v| (v * 2.0).round()).collect();
            let b: Vec<f64> = gaussian(&mut r, m, 0.0, 1.0).iter().map(|v| (v * 2.0).round()).collect();
            let got = wilcoxon_signed_rank(&a, &b, 0.05, Alternative::TwoSided).unwrap();
            let oracle = brute_force_wilcoxon(&a, &b);
            assert!((got.p_value - oracle).abs() <= 1e-15, "m={m}: {} vs {oracle}", got.p_value);
        }
    }
}

#[test]
fn adaptive_noise_matches_naive_residuals() {
    let mut r = rng(14);
    let y = seasonal_series(&mut r, 120, 50.0, 10.0, 2.0);
    let p = 8;
    let noise = adaptive_noise(&series(y.clone()), p).unwrap();
    assert_eq!(noise.first(), p);
    for i in p..=y.len() {
        let mean = y[i - p..i].iter().sum::<f64>() / p as f64;
        assert!((noise.get(i).unwrap() - (y[i - 1] - mean)).abs() < 1e-9);
    }
}

#[test]
fn adaptive_normalization_finds_the_spike() {
    let mut r = rng(15);
    let (n, k, p) = (200, 137, 30);
    let noise = gaussian(&mut r, n, 0.0, 1.0);
    let mut y: Vec<f64> = (0..n)
        .map(|j| 20.0 + 0.5 * (2.0 * std::f64::consts::PI * j as f64 / 52.0).sin() + noise[j])
        .collect();
    y[k - 1] += 10.0;
    let events = adaptive_normalization(&series(y.clone()), p).unwrap();

    let residuals: Vec<f64> = (p..=n)
        .map(|i| y[i - 1] - y[i - p..i].iter().sum::<f64>() / p as f64)
        .collect();
    let expected: Vec<usize> = naive_outliers(&residuals, 3.0).into_iter().map(|j| j + p).collect();
    assert_eq!(events.anomalies, expected);
    assert_eq!(events.anomalies, vec![k]);
}

/// Least squares through the normal equations on absolute positions.
fn naive_trailing_residual(y: &[f64], i: usize, m: usize) -> f64 {
    let xs: Vec<f64> = (i - m + 1..=i).map(|j| j as f64).collect();
    let ys = &y[i - m..i];
    let n = m as f64;
    let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (y[i - 1] - (intercept + slope * i as f64)).powi(2)
}

#[test]
fn change_finder_scores_match_normal_equations() {
    let mut r = rng(16);
    let y = gaussian(&mut r, 90, 30.0, 4.0).into_iter().map(|v| v.max(0.0)).collect::<Vec<_>>();
    let m = 12;
    let scores = change_finder_scores(&series(y.clone()), m).unwrap();
    for i in m..=y.len() {
        let oracle = naive_trailing_residual(&y, i, m);
        assert!((scores.get(i).unwrap() - oracle).abs() < 1e-7 * (1.0 + oracle), "i={i}");
    }
}

#[test]
fn change_finder_locates_level_shift() {
    let mut r = rng(17);
    let (n, k, p, m) = (300, 201, 30, 30);
    let mut hits = 0;
    for _ in 0..100 {
        // 0 for 200 weeks then 50, offset so counts stay non-negative
        let y = step_series(&mut r, n, k, 50.0, 10.0, 1.0);
        let ev = change_finder(&series(y), p, m).unwrap();
        if ev.change_points.iter().any(|&i| i + p >= k && i <= k + p) {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn noise_of_gaussian_residuals_is_near_two() {
    // with p = 1 the baseline at week i is y_{i-s}; a flat first season makes
    // the residuals of the second season exactly the injected N(2, 1) draws
    let mut r = rng(18);
    let s = 52;
    let eps = gaussian(&mut r, 50, 2.0, 1.0);
    let mut y = vec![10.0; 2 * s + 6];
    for (j, e) in eps.iter().enumerate() {
        y[s + j] = 10.0 + e;
    }
    let y = series(y);
    let base = build_baseline(&y, 1, s, s + 1..=y.len()).unwrap();
    let window = s + 1..=s + 50;
    let summary = pre_novelty_noise(&y, &base, window, s + 51, BootstrapConfig::default()).unwrap();
    let naive_mean = eps.iter().sum::<f64>() / eps.len() as f64;
    assert!((summary.mean - naive_mean).abs() < 1e-12);
    assert!((summary.mean - 2.0).abs() < 0.5, "{}", summary.mean);
    assert!(summary.ci.lo <= summary.mean && summary.mean <= summary.ci.hi);
}

#[test]
fn bootstrap_is_percentile_of_resampled_means() {
    let mut r = rng(20);
    let xs = gaussian(&mut r, 30, 1.0, 2.0);
    let ci = bootstrap_mean_ci(&xs, 1, 0.95, 9).unwrap();
    assert_eq!(ci.lo, ci.hi);
    let constant = bootstrap_mean_ci(&[4.0; 10], 200, 0.95, 9).unwrap();
    assert_eq!((constant.mean, constant.lo, constant.hi), (4.0, 4.0, 4.0));
}

#[test]
fn margin_grows_with_ci_width() {
    let mut r = rng(21);
    let s = 52;
    let n = 6 * s;
    let mut y = seasonal_series(&mut r, n, 100.0, 30.0, 3.0);
    let t = n - 6;
    for v in &mut y[t - 1..] {
        *v += 300.0;
    }
    let y = series(y);
    let baseline = build_baseline(&y, 4, s, 4 * s + 1..=n).unwrap();
    let cov = vec![40.0; n - t + 1];
    let summary = |delta: f64| NoiseSummary {
        window: t - 20..=t - 1,
        residuals: vec![0.0; 20],
        mean: 1.0,
        ci: MeanCI {
            mean: 1.0,
            lo: 1.0 - delta,
            hi: 1.0 + delta,
            reps: 1000,
            level: 0.95,
            seed: 0,
        },
    };
    let margins: Vec<f64> = [0.0, 1.0, 2.0, 5.0]
        .iter()
        .map(|&d| rate_with_margin(&y, &baseline, &summary(d), &cov, t).unwrap().margin)
        .collect();
    assert_eq!(margins[0], 0.0);
    assert!(margins.windows(2).all(|w| w[1] > w[0]), "{margins:?}");
    // shifting the noise level by delta moves cumulative novelty by delta per week
    let eta_lo = novelty_series(&y, &baseline, 1.0 - 2.0, t).unwrap();
    let eta_mid = novelty_series(&y, &baseline, 1.0, t).unwrap();
    let shift: f64 = eta_lo.iter().sum::<f64>() - eta_mid.iter().sum::<f64>();
    assert!((shift - 2.0 * cov.len() as f64).abs() < 1e-9);
    let expected_margin = 2.0 * cov.len() as f64 / cov.iter().sum::<f64>();
    assert!((margins[2] - expected_margin).abs() < 1e-9);
}
