//! Statistical primitives: quartiles and the boxplot fence, percentile
//! bootstrap of a mean, and the Wilcoxon signed-rank test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Fence multiplier used by the anomaly rule.
pub const DEFAULT_FENCE_K: f64 = 3.0;

/// Largest number of non-zero differences for which the Wilcoxon p-value is
/// computed from the exact null distribution.
pub const WILCOXON_EXACT_MAX: usize = 20;

fn check_sample(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("sample contains non-finite values".into()));
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Quantile of an already sorted, non-empty sample by linear interpolation
/// between the closest order statistics (`h = (n-1)·prob`).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// First and third quartiles.
pub fn quartiles(xs: &[f64]) -> Result<(f64, f64)> {
    check_sample(xs)?;
    let v = sorted(xs);
    Ok((quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.75)))
}

/// `[q1 - k·iqr, q3 + k·iqr]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxplotFence {
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub k: f64,
}

impl BoxplotFence {
    pub fn from_sample(xs: &[f64], k: f64) -> Result<Self> {
        if k.is_nan() || k < 0.0 {
            return Err(Error::Domain(format!("fence multiplier must be >= 0, got {k}")));
        }
        let (q1, q3) = quartiles(xs)?;
        Ok(Self {
            q1,
            q3,
            iqr: q3 - q1,
            k,
        })
    }

    pub fn lower(&self) -> f64 {
        self.q1 - self.k * self.iqr
    }

    pub fn upper(&self) -> f64 {
        self.q3 + self.k * self.iqr
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower() && x <= self.upper()
    }
}

/// Zero-based positions of the sample elements outside the boxplot fence.
pub fn boxplot_outliers(xs: &[f64], k: f64) -> Result<Vec<usize>> {
    let fence = BoxplotFence::from_sample(xs, k)?;
    Ok(xs
        .iter()
        .enumerate()
        .filter(|(_, x)| !fence.contains(**x))
        .map(|(i, _)| i)
        .collect())
}

/// Bootstrap confidence interval for a sample mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCI {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
}

impl MeanCI {
    /// Interval collapsed onto a known value; used when no resampling applies.
    pub fn degenerate(value: f64) -> Self {
        Self {
            mean: value,
            lo: value,
            hi: value,
            reps: 1,
            level: 0.95,
            seed: 0,
        }
    }
}

/// Percentile bootstrap of the mean.
///
/// Draws `reps` resamples of size `|xs|` with replacement from a ChaCha8
/// stream seeded with `seed`, sorts the replicate means and reads the
/// `(1-level)/2` and `1-(1-level)/2` quantiles.
pub fn bootstrap_mean_ci(xs: &[f64], reps: usize, level: f64, seed: u64) -> Result<MeanCI> {
    check_sample(xs)?;
    if xs.len() < 2 {
        return Err(Error::Domain(
            "bootstrap needs at least 2 observations".into(),
        ));
    }
    if reps == 0 {
        return Err(Error::Domain("bootstrap needs at least 1 repetition".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level {level} not in (0, 1)")));
    }
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..reps)
        .map(|_| (0..n).map(|_| xs[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(MeanCI {
        mean,
        lo: quantile_sorted(&means, tail),
        hi: quantile_sorted(&means, 1.0 - tail),
        reps,
        level,
        seed,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// `a` tends to exceed `b`.
    Greater,
    /// `a` tends to fall below `b`.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `min(W+, W-)` for the two-sided test, `W+` otherwise.
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
    /// Number of non-zero differences used.
    pub n_used: usize,
    pub exact: bool,
}

impl TestResult {
    fn new(statistic: f64, p_value: f64, alpha: f64, n_used: usize, exact: bool) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            statistic,
            p_value,
            alpha,
            significant: p_value < alpha,
            n_used,
            exact,
        }
    }
}

/// Average ranks (1-based) of `xs`, ties sharing the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Wilcoxon signed-rank test of paired samples `a` and `b`.
///
/// Zero differences are dropped and tied magnitudes receive average ranks.
/// With at most [`WILCOXON_EXACT_MAX`] remaining differences the p-value is
/// read from the exact permutation distribution of `W+` (conditional on the
/// observed ranks, ties included); larger samples use the normal
/// approximation with tie and continuity corrections. When every difference
/// is zero the result is `p = 1`.
pub fn wilcoxon_signed_rank(
    a: &[f64],
    b: &[f64],
    alpha: f64,
    alternative: Alternative,
) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    check_sample(a)?;
    check_sample(b)?;
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let m = diffs.len();
    if m == 0 {
        return Ok(TestResult::new(0.0, 1.0, alpha, 0, true));
    }
    let ranks = average_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (m * (m + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let statistic = match alternative {
        Alternative::TwoSided => w_plus.min(w_minus),
        _ => w_plus,
    };
    if m <= WILCOXON_EXACT_MAX {
        let p = exact_p_value(&ranks, w_plus, alternative);
        Ok(TestResult::new(statistic, p, alpha, m, true))
    } else {
        let p = normal_p_value(&ranks, w_plus, alternative);
        Ok(TestResult::new(statistic, p, alpha, m, false))
    }
}

/// One-sample form: tests whether `xs` is centred on `mu`.
pub fn wilcoxon_one_sample(
    xs: &[f64],
    mu: f64,
    alpha: f64,
    alternative: Alternative,
) -> Result<TestResult> {
    let centre = vec![mu; xs.len()];
    wilcoxon_signed_rank(xs, &centre, alpha, alternative)
}

/// Exact tail probability from the null distribution of `W+`.
///
/// Average ranks are multiples of one half, so doubled ranks are integers and
/// the distribution is a subset-sum count over them.
fn exact_p_value(ranks: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for v in (0..=reach).rev() {
            if counts[v] > 0 {
                counts[v + r] += counts[v];
            }
        }
        reach += r;
    }
    let patterns = 2f64.powi(ranks.len() as i32);
    let observed = (2.0 * w_plus).round() as usize;
    let count = |pred: &dyn Fn(usize) -> bool| -> u64 {
        counts
            .iter()
            .enumerate()
            .filter(|(v, _)| pred(*v))
            .map(|(_, c)| *c)
            .sum()
    };
    let hits = match alternative {
        Alternative::Greater => count(&|v| v >= observed),
        Alternative::Less => count(&|v| v <= observed),
        Alternative::TwoSided => {
            let w = observed.min(total - observed);
            count(&|v| v <= w || v >= total - w)
        }
    };
    hits as f64 / patterns
}

fn normal_p_value(ranks: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    let m = ranks.len() as f64;
    let mean = m * (m + 1.0) / 4.0;
    let mut sorted_ranks = ranks.to_vec();
    sorted_ranks.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted_ranks.len() {
        let mut j = i + 1;
        while j < sorted_ranks.len() && sorted_ranks[j] == sorted_ranks[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = m * (m + 1.0) * (2.0 * m + 1.0) / 24.0 - tie_term / 48.0;
    let sd = var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let diff = w_plus - mean;
    match alternative {
        Alternative::TwoSided => {
            let z = (diff.abs() - 0.5).max(0.0) / sd;
            (2.0 * normal.sf(z)).min(1.0)
        }
        Alternative::Greater => normal.sf((diff - 0.5) / sd),
        Alternative::Less => normal.cdf((diff + 0.5) / sd),
    }
}
