//! Inertial baseline, novelty and under-reporting estimates.
//!
//! The baseline at week `i` is the seasonal exponential moving average of the
//! `p` observations `y_{i-p·s}, ..., y_{i-s}`, i.e. the same week in each of
//! the previous `p` seasons with the most recent season weighted highest.
//! Before the rupture week `t` the residuals `y_i - baseline_i` describe the
//! noise; from `t` on, everything above baseline plus mean noise is novelty:
//!
//! ```text
//! eta_i = y_i - baseline_i - mean_noise        t <= i <= n
//! sub_i = eta_i - cov_i
//! cur_i = sum_{j=t..=i} sub_j
//! tx_i  = cur_i / sum_{j=t..=i} cov_j
//! ```
//!
//! where `cov_i` counts the observations already attributed to the new
//! phenomenon. Negative `eta` and `sub` are kept.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{
    bootstrap_mean_ci, wilcoxon_one_sample, wilcoxon_signed_rank, Alternative, MeanCI, TestResult,
};
use crate::timeseries::{average_of, seasonal_subsequence, AverageKind, TimeSeries};

pub const DEFAULT_P: usize = 4;
pub const DEFAULT_S: usize = 52;
pub const DEFAULT_T: usize = 584;
pub const DEFAULT_HORIZON: usize = 590;
pub const DEFAULT_NOISE_CYCLES: usize = 4;
pub const DEFAULT_REPS: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Seasonal exponential baseline over a contiguous range of weeks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InertialBaseline {
    first: usize,
    predicted: Vec<f64>,
    p: usize,
    s: usize,
}

impl InertialBaseline {
    pub fn get(&self, i: usize) -> Option<f64> {
        i.checked_sub(self.first)
            .and_then(|k| self.predicted.get(k))
            .copied()
    }

    pub fn first(&self) -> usize {
        self.first
    }

    pub fn last(&self) -> usize {
        self.first + self.predicted.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.predicted
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn s(&self) -> usize {
        self.s
    }

    fn require(&self, i: usize) -> Result<f64> {
        self.get(i).ok_or_else(|| {
            Error::Bounds(format!(
                "baseline covers weeks {}..={}, week {i} requested",
                self.first,
                self.last()
            ))
        })
    }
}

/// Seasonal exponential moving average of the `p` seasonal predecessors of
/// every week in `range`.
pub fn build_baseline(
    y: &TimeSeries,
    p: usize,
    s: usize,
    range: RangeInclusive<usize>,
) -> Result<InertialBaseline> {
    if p == 0 || s == 0 {
        return Err(Error::Bounds(format!(
            "baseline needs p >= 1 and s >= 1 (got p = {p}, s = {s})"
        )));
    }
    let (first, last) = (*range.start(), *range.end());
    if range.is_empty() {
        return Err(Error::Bounds(format!("empty baseline range {first}..={last}")));
    }
    if last > y.len() {
        return Err(Error::Bounds(format!(
            "baseline range ends at {last} beyond |y| = {}",
            y.len()
        )));
    }
    if first <= p * s {
        return Err(Error::Bounds(format!(
            "insufficient history at week {first}: needs i - p*s >= 1 with p*s = {}",
            p * s
        )));
    }
    let predicted = range
        .map(|i| {
            let sub = seasonal_subsequence(y.values(), i - s, p, s)?;
            Ok(average_of(sub.values(), AverageKind::Exponential))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InertialBaseline {
        first,
        predicted,
        p,
        s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            reps: DEFAULT_REPS,
            level: DEFAULT_LEVEL,
            seed: 1,
        }
    }
}

/// Residuals of the baseline before the rupture and the CI of their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSummary {
    pub window: RangeInclusive<usize>,
    pub residuals: Vec<f64>,
    pub mean: f64,
    pub ci: MeanCI,
}

/// The last `cycles` seasons before `t`, clipped to where a baseline exists.
pub fn default_noise_window(
    t: usize,
    p: usize,
    s: usize,
    cycles: usize,
) -> Result<RangeInclusive<usize>> {
    let earliest = p * s + 1;
    let start = t.saturating_sub(cycles * s).max(earliest);
    if t == 0 || start > t - 1 {
        return Err(Error::Domain(format!(
            "no pre-novelty weeks with a baseline before t = {t} (first usable week is {earliest})"
        )));
    }
    Ok(start..=t - 1)
}

pub fn pre_novelty_noise(
    y: &TimeSeries,
    baseline: &InertialBaseline,
    window: RangeInclusive<usize>,
    t: usize,
    bootstrap: BootstrapConfig,
) -> Result<NoiseSummary> {
    if window.is_empty() {
        return Err(Error::Domain("empty pre-novelty window".into()));
    }
    if *window.end() >= t {
        return Err(Error::Domain(format!(
            "pre-novelty window {}..={} must end before t = {t}",
            window.start(),
            window.end()
        )));
    }
    let residuals = window
        .clone()
        .map(|i| Ok(y.get(i)? - baseline.require(i)?))
        .collect::<Result<Vec<_>>>()?;
    let ci = bootstrap_mean_ci(&residuals, bootstrap.reps, bootstrap.level, bootstrap.seed)?;
    Ok(NoiseSummary {
        window,
        mean: ci.mean,
        residuals,
        ci,
    })
}

/// `eta_i = y_i - baseline_i - noise_level` for `t <= i <= |y|`.
pub fn novelty_series(
    y: &TimeSeries,
    baseline: &InertialBaseline,
    noise_level: f64,
    t: usize,
) -> Result<Vec<f64>> {
    if t == 0 || t > y.len() {
        return Err(Error::Bounds(format!(
            "rupture week t = {t} outside 1..={}",
            y.len()
        )));
    }
    (t..=y.len())
        .map(|i| Ok(y.get(i)? - baseline.require(i)? - noise_level))
        .collect()
}

/// Weekly and cumulative under-reporting over the novelty window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnderReport {
    pub sub: Vec<f64>,
    pub cur: Vec<f64>,
    /// Running rate; `None` while no reported observation has accumulated.
    pub tx: Vec<Option<f64>>,
    pub cum_novelty: f64,
    pub cum_reported: f64,
}

impl UnderReport {
    /// Cumulative under-report at the last week.
    pub fn final_cur(&self) -> f64 {
        self.cur.last().copied().unwrap_or(0.0)
    }

    /// Final rate; `None` when nothing was reported.
    pub fn rate(&self) -> Option<f64> {
        self.tx.last().copied().flatten()
    }
}

/// `eta` and `cov` are aligned on the novelty window `t..=n`.
pub fn under_report(eta: &[f64], cov: &[f64]) -> Result<UnderReport> {
    if eta.len() != cov.len() {
        return Err(Error::Domain(format!(
            "novelty ({}) and reported ({}) series are not aligned",
            eta.len(),
            cov.len()
        )));
    }
    if eta.is_empty() {
        return Err(Error::Domain("empty novelty window".into()));
    }
    let sub: Vec<f64> = eta.iter().zip(cov).map(|(e, c)| e - c).collect();
    let mut cur = Vec::with_capacity(sub.len());
    let mut tx = Vec::with_capacity(sub.len());
    let (mut acc_sub, mut acc_cov) = (0.0, 0.0);
    for (s, c) in sub.iter().zip(cov) {
        acc_sub += s;
        acc_cov += c;
        cur.push(acc_sub);
        tx.push((acc_cov > 0.0).then(|| acc_sub / acc_cov));
    }
    Ok(UnderReport {
        sub,
        cur,
        tx,
        cum_novelty: eta.iter().sum(),
        cum_reported: acc_cov,
    })
}

/// Final rate with the spread induced by the noise CI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: Option<f64>,
    pub margin: f64,
    /// Rate with the noise level at the lower CI endpoint.
    pub at_lo: Option<f64>,
    /// Rate with the noise level at the upper CI endpoint.
    pub at_hi: Option<f64>,
}

/// Evaluates the final rate with the noise level at the CI mean and at both
/// CI endpoints; the margin is the largest deviation from the central rate.
pub fn rate_with_margin(
    y: &TimeSeries,
    baseline: &InertialBaseline,
    noise: &NoiseSummary,
    cov: &[f64],
    t: usize,
) -> Result<RateEstimate> {
    let rate_at = |level: f64| -> Result<Option<f64>> {
        let eta = novelty_series(y, baseline, level, t)?;
        Ok(under_report(&eta, cov)?.rate())
    };
    let rate = rate_at(noise.mean)?;
    let at_lo = rate_at(noise.ci.lo)?;
    let at_hi = rate_at(noise.ci.hi)?;
    let margin = match rate {
        Some(r) => [at_lo, at_hi]
            .into_iter()
            .flatten()
            .map(|x| (x - r).abs())
            .fold(0.0, f64::max),
        None => 0.0,
    };
    Ok(RateEstimate {
        rate,
        margin,
        at_lo,
        at_hi,
    })
}

/// How the novelty gate compares novelty with pre-novelty noise.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoveltyGateForm {
    /// One-sample test of `eta_i - mean_noise` against zero.
    #[default]
    OneSample,
    /// Paired test of `eta_i` against the last `|eta|` pre-novelty residuals.
    Paired,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOptions {
    pub alpha: f64,
    pub alternative: Alternative,
    pub novelty_form: NoveltyGateForm,
}

impl Default for GateOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            alternative: Alternative::TwoSided,
            novelty_form: NoveltyGateForm::OneSample,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gates {
    /// Novelty distinguishable from noise.
    pub novelty: TestResult,
    /// Novelty distinguishable from reported counts.
    pub underreport: TestResult,
}

impl Gates {
    pub fn novelty_significant(&self) -> bool {
        self.novelty.significant
    }

    pub fn underreport_significant(&self) -> bool {
        self.underreport.significant
    }
}

pub fn significance_gates(
    eta: &[f64],
    noise: &NoiseSummary,
    cov: &[f64],
    options: GateOptions,
) -> Result<Gates> {
    if eta.is_empty() {
        return Err(Error::Domain("empty novelty window".into()));
    }
    let novelty = match options.novelty_form {
        NoveltyGateForm::OneSample => {
            wilcoxon_one_sample(eta, noise.mean, options.alpha, options.alternative)?
        }
        NoveltyGateForm::Paired => {
            let n = eta.len();
            if noise.residuals.len() < n {
                return Err(Error::Domain(format!(
                    "paired novelty gate needs {n} residuals, window has {}",
                    noise.residuals.len()
                )));
            }
            let tail = &noise.residuals[noise.residuals.len() - n..];
            wilcoxon_signed_rank(eta, tail, options.alpha, options.alternative)?
        }
    };
    let underreport = wilcoxon_signed_rank(eta, cov, options.alpha, options.alternative)?;
    Ok(Gates {
        novelty,
        underreport,
    })
}

/// Why a rate is not reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Withheld {
    /// Novelty not distinguishable from noise.
    NoNovelty,
    /// Novelty not distinguishable from reported counts.
    NoUnderReport,
    /// Nothing reported in the novelty window.
    NoReported,
}

impl Withheld {
    pub fn code(self) -> &'static str {
        match self {
            Withheld::NoNovelty => "°",
            Withheld::NoUnderReport => "•",
            Withheld::NoReported => "no-reported",
        }
    }
}

/// Which pre-novelty weeks feed the noise estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NoiseWindow {
    /// The given number of seasons immediately before `t`.
    LastCycles(usize),
    Explicit(RangeInclusive<usize>),
}

impl Default for NoiseWindow {
    fn default() -> Self {
        NoiseWindow::LastCycles(DEFAULT_NOISE_CYCLES)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyConfig {
    pub p: usize,
    pub s: usize,
    pub t: usize,
    pub noise_window: NoiseWindow,
    pub bootstrap: BootstrapConfig,
    pub gates: GateOptions,
}

impl Default for NoveltyConfig {
    fn default() -> Self {
        Self {
            p: DEFAULT_P,
            s: DEFAULT_S,
            t: DEFAULT_T,
            noise_window: NoiseWindow::default(),
            bootstrap: BootstrapConfig::default(),
            gates: GateOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeekRecord {
    pub index: usize,
    pub observed: f64,
    pub baseline: f64,
    pub novelty: f64,
    pub reported: f64,
    pub sub: f64,
    pub cur: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyResult {
    pub t: usize,
    pub horizon: usize,
    pub weeks: Vec<WeekRecord>,
    pub baseline: InertialBaseline,
    pub noise: NoiseSummary,
    pub cum_novelty: f64,
    pub cum_reported: f64,
    pub cur: f64,
    pub rate: RateEstimate,
    pub gates: Gates,
    pub withheld: Option<Withheld>,
}

impl NoveltyResult {
    /// The rate, unless a gate or an empty reported series withholds it.
    pub fn reported_rate(&self) -> Option<f64> {
        match self.withheld {
            Some(_) => None,
            None => self.rate.rate,
        }
    }
}

/// Full estimation for one series: baseline, noise, novelty, under-report,
/// rate with margin and both significance gates.
///
/// `cov` is the reported series aligned with `y` (same length, same weeks);
/// the horizon is `|y|`.
pub fn analyze(y: &TimeSeries, cov: &[f64], config: &NoveltyConfig) -> Result<NoveltyResult> {
    let n = y.len();
    let t = config.t;
    if cov.len() != n {
        return Err(Error::Domain(format!(
            "reported series has {} weeks, observed series {n}",
            cov.len()
        )));
    }
    if t == 0 || t > n {
        return Err(Error::Bounds(format!("rupture week t = {t} outside 1..={n}")));
    }
    let window = match &config.noise_window {
        NoiseWindow::LastCycles(c) => default_noise_window(t, config.p, config.s, *c)?,
        NoiseWindow::Explicit(w) => w.clone(),
    };
    let baseline = build_baseline(y, config.p, config.s, *window.start()..=n)?;
    let noise = pre_novelty_noise(y, &baseline, window, t, config.bootstrap)?;
    let eta = novelty_series(y, &baseline, noise.mean, t)?;
    let cov_window = &cov[t - 1..];
    let report = under_report(&eta, cov_window)?;
    let rate = rate_with_margin(y, &baseline, &noise, cov_window, t)?;
    let gates = significance_gates(&eta, &noise, cov_window, config.gates)?;

    let withheld = if !gates.novelty_significant() {
        Some(Withheld::NoNovelty)
    } else if !gates.underreport_significant() {
        Some(Withheld::NoUnderReport)
    } else if report.rate().is_none() {
        Some(Withheld::NoReported)
    } else {
        None
    };

    let weeks = (t..=n)
        .enumerate()
        .map(|(k, i)| WeekRecord {
            index: i,
            observed: y.values()[i - 1],
            baseline: baseline.predicted[i - baseline.first],
            novelty: eta[k],
            reported: cov_window[k],
            sub: report.sub[k],
            cur: report.cur[k],
        })
        .collect();

    Ok(NoveltyResult {
        t,
        horizon: n,
        weeks,
        cum_novelty: report.cum_novelty,
        cum_reported: report.cum_reported,
        cur: report.final_cur(),
        baseline,
        noise,
        rate,
        gates,
        withheld,
    })
}
