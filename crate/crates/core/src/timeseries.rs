//! Weekly series, subsequence extraction and moving averages.
//!
//! Positions are 1-based at every public boundary: `y_1` is the oldest
//! observation and `y_n` (with `n = len()`) the most recent. Internally values
//! live in a flat `Vec<f64>`.
//!
//! The two estimators are the simple moving average (arithmetic mean of the
//! subsequence) and the exponential moving average with weights
//! `alpha_k = (1 - 2/(p+1))^(p-k)` for `k = 1..=p`, so the most recent term
//! has weight 1. Both have seasonal forms in which the subsequence is taken
//! at lag `s` instead of at consecutive positions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which count a series carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Cases,
    Deaths,
}

impl Measure {
    pub const ALL: [Measure; 2] = [Measure::Cases, Measure::Deaths];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Cases => "cases",
            Measure::Deaths => "deaths",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cases" | "case" => Ok(Measure::Cases),
            "deaths" | "death" => Ok(Measure::Deaths),
            other => Err(Error::Domain(format!("unknown measure `{other}`"))),
        }
    }
}

/// Identifies a series: region code and measure.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeriesLabel {
    pub region: String,
    pub measure: Measure,
}

impl SeriesLabel {
    pub fn new(region: impl Into<String>, measure: Measure) -> Self {
        Self {
            region: region.into(),
            measure,
        }
    }
}

impl fmt::Display for SeriesLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.region, self.measure)
    }
}

/// Ordered weekly observations for one (region, measure) pair.
///
/// Values are finite and non-negative. The series is immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    label: SeriesLabel,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(label: SeriesLabel, values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(format!(
                "series {label}: value {} at position {} is not a finite non-negative count",
                values[pos],
                pos + 1
            )));
        }
        Ok(Self { label, values })
    }

    pub fn label(&self) -> &SeriesLabel {
        &self.label
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Observation `y_i` (1-based).
    pub fn get(&self, i: usize) -> Result<f64> {
        check_index(i, self.len())?;
        Ok(self.values[i - 1])
    }

    /// The first `n` observations as a new series with the same label.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.len() {
            return Err(Error::Bounds(format!(
                "cannot truncate series {} of length {} to {n}",
                self.label,
                self.len()
            )));
        }
        Ok(Self {
            label: self.label.clone(),
            values: self.values[..n].to_vec(),
        })
    }

    pub fn subsequence(&self, i: usize, p: usize) -> Result<Subsequence> {
        subsequence(&self.values, i, p)
    }

    pub fn seasonal_subsequence(&self, i: usize, p: usize, s: usize) -> Result<Subsequence> {
        seasonal_subsequence(&self.values, i, p, s)
    }

    pub fn moving_average(&self, i: usize, spec: AverageSpec) -> Result<f64> {
        moving_average(&self.values, i, spec)
    }
}

/// `p` values ending at origin `i`, taken every `lag` positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsequence {
    values: Vec<f64>,
    origin: usize,
    lag: usize,
}

impl Subsequence {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    /// Seasonal lag; 1 for a continuous subsequence.
    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AverageKind {
    Simple,
    Exponential,
}

/// Term count, seasonal period and weighting of a moving average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AverageSpec {
    p: usize,
    s: usize,
    kind: AverageKind,
}

impl AverageSpec {
    pub fn new(p: usize, s: usize, kind: AverageKind) -> Result<Self> {
        if p == 0 {
            return Err(Error::Bounds("term count p must be at least 1".into()));
        }
        if s == 0 {
            return Err(Error::Bounds("seasonal period s must be at least 1".into()));
        }
        Ok(Self { p, s, kind })
    }

    pub fn simple(p: usize) -> Result<Self> {
        Self::new(p, 1, AverageKind::Simple)
    }

    pub fn exponential(p: usize) -> Result<Self> {
        Self::new(p, 1, AverageKind::Exponential)
    }

    pub fn seasonal(p: usize, s: usize, kind: AverageKind) -> Result<Self> {
        Self::new(p, s, kind)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn kind(&self) -> AverageKind {
        self.kind
    }
}

fn check_index(i: usize, len: usize) -> Result<()> {
    if i == 0 || i > len {
        return Err(Error::Bounds(format!(
            "index {i} violates 1 <= i <= |y| = {len}"
        )));
    }
    Ok(())
}

/// `<y_{i-(p-1)}, ..., y_i>` over a raw slice.
pub fn subsequence(values: &[f64], i: usize, p: usize) -> Result<Subsequence> {
    if p == 0 {
        return Err(Error::Bounds("term count p must be at least 1".into()));
    }
    check_index(i, values.len())?;
    if p > i {
        return Err(Error::Bounds(format!("p = {p} violates p <= i = {i}")));
    }
    Ok(Subsequence {
        values: values[i - p..i].to_vec(),
        origin: i,
        lag: 1,
    })
}

/// `<y_{i-(p-1)s}, ..., y_{i-s}, y_i>` over a raw slice.
///
/// Requires `i - (p-1)*s >= 1`, which is stronger than `p <= i` whenever
/// `s > 1`.
pub fn seasonal_subsequence(values: &[f64], i: usize, p: usize, s: usize) -> Result<Subsequence> {
    if s == 0 {
        return Err(Error::Bounds("seasonal period s must be at least 1".into()));
    }
    if p == 0 {
        return Err(Error::Bounds("term count p must be at least 1".into()));
    }
    check_index(i, values.len())?;
    let reach = (p - 1) * s;
    if reach >= i {
        return Err(Error::Bounds(format!(
            "insufficient seasonal history: i - (p-1)*s = {i} - {reach} < 1"
        )));
    }
    let first = i - reach;
    let values = (0..p).map(|k| values[first - 1 + k * s]).collect();
    Ok(Subsequence {
        values,
        origin: i,
        lag: s,
    })
}

/// Exponential weights `alpha_k = (1 - 2/(p+1))^(p-k)`, `k = 1..=p`.
pub fn exponential_weights(p: usize) -> Vec<f64> {
    let base = 1.0 - 2.0 / (p as f64 + 1.0);
    (1..=p).map(|k| base.powi((p - k) as i32)).collect()
}

/// Mean of `terms` under `kind`.
pub fn average_of(terms: &[f64], kind: AverageKind) -> f64 {
    match kind {
        AverageKind::Simple => terms.iter().sum::<f64>() / terms.len() as f64,
        AverageKind::Exponential => {
            let weights = exponential_weights(terms.len());
            let num: f64 = weights.iter().zip(terms).map(|(w, t)| w * t).sum();
            let den: f64 = weights.iter().sum();
            num / den
        }
    }
}

/// Moving average at position `i` (1-based) of a raw slice.
pub fn moving_average(values: &[f64], i: usize, spec: AverageSpec) -> Result<f64> {
    let sub = if spec.s == 1 {
        subsequence(values, i, spec.p)?
    } else {
        seasonal_subsequence(values, i, spec.p, spec.s)?
    };
    Ok(average_of(&sub.values, spec.kind))
}

/// Simple moving average for every position `p..=n`; entry `k` belongs to
/// position `p + k`.
pub fn rolling_mean(values: &[f64], p: usize) -> Result<Vec<f64>> {
    if p == 0 {
        return Err(Error::Bounds("term count p must be at least 1".into()));
    }
    if values.len() < p {
        return Err(Error::Bounds(format!(
            "series of length {} is shorter than p = {p}",
            values.len()
        )));
    }
    Ok(values
        .windows(p)
        .map(|w| w.iter().sum::<f64>() / p as f64)
        .collect())
}
