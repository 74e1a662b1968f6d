//! Rupture detectors.
//!
//! * Adaptive normalization: simple moving average as inertia, residual as
//!   noise, residuals outside the boxplot fence are anomalies.
//! * Change finder: a trailing-window linear regression scores every position
//!   by its squared residual; scores outside the fence are anomalies, and the
//!   moving average of the scores is fenced again to find change points.
//!
//! Positions whose inertia or score is undefined (the series head) take no
//! part in the fence computation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{boxplot_outliers, DEFAULT_FENCE_K};
use crate::timeseries::{rolling_mean, SeriesLabel, TimeSeries};

pub const DEFAULT_DETECTION_P: usize = 30;
pub const DEFAULT_REGRESSION_WINDOW: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionParams {
    /// Moving-average term count.
    pub p: usize,
    /// Regression window; absent for adaptive normalization.
    pub m: Option<usize>,
}

/// Detected events of one series. All indices are 1-based and sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSet {
    pub label: SeriesLabel,
    pub anomalies: Vec<usize>,
    /// First index of every run of flagged change-point positions.
    pub change_points: Vec<usize>,
    /// Every flagged change-point position before run collapsing.
    pub change_point_flags: Vec<usize>,
    pub params: DetectionParams,
}

impl EventSet {
    pub fn empty(label: SeriesLabel, params: DetectionParams) -> Self {
        Self {
            label,
            anomalies: Vec::new(),
            change_points: Vec::new(),
            change_point_flags: Vec::new(),
            params,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.anomalies.is_empty() && self.change_points.is_empty()
    }
}

/// Non-negative scores aligned to source positions `first..first+len`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    first: usize,
    values: Vec<f64>,
}

impl ScoreSeries {
    /// Position of the first score.
    pub fn first(&self) -> usize {
        self.first
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        i.checked_sub(self.first).and_then(|k| self.values.get(k)).copied()
    }

    /// Source positions of the scores outside the fence.
    fn outliers(&self) -> Result<Vec<usize>> {
        if self.values.is_empty() {
            return Ok(Vec::new());
        }
        Ok(boxplot_outliers(&self.values, DEFAULT_FENCE_K)?
            .into_iter()
            .map(|k| k + self.first)
            .collect())
    }
}

/// Collapses runs of consecutive indices to the first index of each run.
pub fn run_starts(sorted: &[usize]) -> Vec<usize> {
    sorted
        .iter()
        .enumerate()
        .filter(|(k, i)| *k == 0 || sorted[k - 1] + 1 != **i)
        .map(|(_, i)| *i)
        .collect()
}

/// Residuals `y_i - mean(y_{i-p+1..=i})` for `i = p..=n`.
pub fn adaptive_noise(y: &TimeSeries, p: usize) -> Result<ScoreSeries> {
    if y.len() < p {
        return Err(Error::Bounds(format!(
            "series {} has {} observations, adaptive normalization needs p = {p}",
            y.label(),
            y.len()
        )));
    }
    let means = rolling_mean(y.values(), p)?;
    let values = means
        .iter()
        .zip(&y.values()[p - 1..])
        .map(|(m, v)| v - m)
        .collect();
    Ok(ScoreSeries { first: p, values })
}

/// Anomalies by adaptive normalization with a `p`-term simple moving average.
pub fn adaptive_normalization(y: &TimeSeries, p: usize) -> Result<EventSet> {
    let noise = adaptive_noise(y, p)?;
    let mut events = EventSet::empty(y.label().clone(), DetectionParams { p, m: None });
    events.anomalies = noise.outliers()?;
    Ok(events)
}

/// Squared residuals of a trailing-window least-squares line.
///
/// For every `i >= m` a line is fitted to `(j, y_j)` over `j = i-m+1..=i`
/// and evaluated at `i`.
pub fn change_finder_scores(y: &TimeSeries, m: usize) -> Result<ScoreSeries> {
    if m < 2 {
        return Err(Error::Bounds(format!(
            "regression window m = {m} must be at least 2"
        )));
    }
    if y.len() < m {
        return Err(Error::Bounds(format!(
            "series {} has {} observations, regression window is {m}",
            y.label(),
            y.len()
        )));
    }
    // local abscissae 0..m, so x-bar and Sxx are the same for every window
    let x_mean = (m - 1) as f64 / 2.0;
    let sxx: f64 = (0..m).map(|x| (x as f64 - x_mean).powi(2)).sum();
    let values = y
        .values()
        .windows(m)
        .map(|w| {
            let y_mean = w.iter().sum::<f64>() / m as f64;
            let sxy: f64 = w
                .iter()
                .enumerate()
                .map(|(x, v)| (x as f64 - x_mean) * (v - y_mean))
                .sum();
            let slope = sxy / sxx;
            let predicted = y_mean + slope * ((m - 1) as f64 - x_mean);
            let last = w[m - 1];
            (predicted - last).powi(2)
        })
        .collect();
    Ok(ScoreSeries { first: m, values })
}

/// Change points (and phase-one anomalies) by the change finder.
///
/// `p` is the term count of the score smoothing and `m` the regression
/// window; the series must hold at least `m + p` observations. Phase-one
/// anomalies that coincide with a reported change point are dropped from the
/// anomaly set.
pub fn change_finder(y: &TimeSeries, p: usize, m: usize) -> Result<EventSet> {
    if p == 0 {
        return Err(Error::Bounds("term count p must be at least 1".into()));
    }
    if y.len() < m + p {
        return Err(Error::Bounds(format!(
            "series {} has {} observations, change finder needs m + p = {}",
            y.label(),
            y.len(),
            m + p
        )));
    }
    let scores = change_finder_scores(y, m)?;
    let phase_one = scores.outliers()?;

    let smoothed = ScoreSeries {
        first: scores.first + p - 1,
        values: rolling_mean(scores.values(), p)?,
    };
    let flags = smoothed.outliers()?;
    let change_points = run_starts(&flags);

    let anomalies = phase_one
        .into_iter()
        .filter(|i| change_points.binary_search(i).is_err())
        .collect();
    Ok(EventSet {
        label: y.label().clone(),
        anomalies,
        change_points,
        change_point_flags: flags,
        params: DetectionParams { p, m: Some(m) },
    })
}

/// Combines anomalies from one detector with change points from another.
pub fn consolidate_events(anomalies: &EventSet, change_points: &EventSet) -> Result<EventSet> {
    if anomalies.label != change_points.label {
        return Err(Error::Domain(format!(
            "cannot merge events of {} with events of {}",
            anomalies.label, change_points.label
        )));
    }
    Ok(EventSet {
        label: anomalies.label.clone(),
        anomalies: anomalies.anomalies.clone(),
        change_points: change_points.change_points.clone(),
        change_point_flags: change_points.change_point_flags.clone(),
        params: change_points.params,
    })
}
