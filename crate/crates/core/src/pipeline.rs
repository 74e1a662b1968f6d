//! Batch drivers over every (state, measure) series of a dataset.
//!
//! Series are analysed in parallel and the results are reduced in
//! (state, measure) order, so outputs do not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{
    adaptive_normalization, change_finder, consolidate_events, EventSet, DEFAULT_DETECTION_P,
    DEFAULT_REGRESSION_WINDOW,
};
use crate::error::{Error, Result};
use crate::ingest::{ReferenceTotals, StateDataset};
use crate::novelty::{
    analyze, BootstrapConfig, GateOptions, NoiseWindow, NoveltyConfig, NoveltyGateForm,
    NoveltyResult, DEFAULT_ALPHA, DEFAULT_HORIZON, DEFAULT_LEVEL, DEFAULT_NOISE_CYCLES, DEFAULT_P,
    DEFAULT_REPS, DEFAULT_S, DEFAULT_T,
};
use crate::report::{EventKind, EventRow, Gate, ReportRow, SeriesPlot};
use crate::stats::Alternative;
use crate::timeseries::{Measure, TimeSeries};

/// Rupture week: a fixed position or the first change point in a given year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartWeek {
    Index(usize),
    /// Earliest change point whose epidemiological year matches.
    Auto { year: i32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub p: usize,
    pub s: usize,
    pub t: StartWeek,
    pub horizon: usize,
    pub detection_p: usize,
    pub regression_window: usize,
    pub reps: usize,
    pub level: f64,
    pub alpha: f64,
    pub seed: u64,
    pub alternative: Alternative,
    pub novelty_gate: NoveltyGateForm,
    pub noise_cycles: usize,
    pub measures: Vec<Measure>,
    /// `None` selects every state.
    pub state: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p: DEFAULT_P,
            s: DEFAULT_S,
            t: StartWeek::Index(DEFAULT_T),
            horizon: DEFAULT_HORIZON,
            detection_p: DEFAULT_DETECTION_P,
            regression_window: DEFAULT_REGRESSION_WINDOW,
            reps: DEFAULT_REPS,
            level: DEFAULT_LEVEL,
            alpha: DEFAULT_ALPHA,
            seed: 1,
            alternative: Alternative::TwoSided,
            novelty_gate: NoveltyGateForm::OneSample,
            noise_cycles: DEFAULT_NOISE_CYCLES,
            measures: Measure::ALL.to_vec(),
            state: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("p", self.p),
            ("s", self.s),
            ("horizon", self.horizon),
            ("detection p", self.detection_p),
            ("regression window", self.regression_window),
            ("reps", self.reps),
            ("noise cycles", self.noise_cycles),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Domain(format!("{name} must be positive")));
        }
        if let StartWeek::Index(t) = self.t {
            if t == 0 || t >= self.horizon {
                return Err(Error::Domain(format!(
                    "t = {t} must satisfy 1 <= t < horizon = {}",
                    self.horizon
                )));
            }
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Domain(format!("level {} not in (0, 1)", self.level)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        if self.measures.is_empty() {
            return Err(Error::Domain("no measure selected".into()));
        }
        Ok(())
    }

    fn novelty_config(&self, t: usize, seed: u64) -> NoveltyConfig {
        NoveltyConfig {
            p: self.p,
            s: self.s,
            t,
            noise_window: NoiseWindow::LastCycles(self.noise_cycles),
            bootstrap: BootstrapConfig {
                reps: self.reps,
                level: self.level,
                seed,
            },
            gates: GateOptions {
                alpha: self.alpha,
                alternative: self.alternative,
                novelty_form: self.novelty_gate,
            },
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Bootstrap seed of one series, derived from the run seed.
pub fn series_seed(seed: u64, state: &str, measure: Measure) -> u64 {
    let tag = match measure {
        Measure::Cases => 1,
        Measure::Deaths => 2,
    };
    splitmix64(seed ^ fnv1a(state.as_bytes()).rotate_left(7) ^ tag)
}

fn jobs(dataset: &StateDataset, config: &RunConfig) -> Result<Vec<(String, Measure)>> {
    if let Some(code) = &config.state {
        if !dataset.states.contains_key(code) {
            return Err(Error::Domain(format!("state {code} not present in the data")));
        }
    }
    let mut measures = config.measures.clone();
    measures.sort();
    measures.dedup();
    Ok(dataset
        .states
        .keys()
        .filter(|code| config.state.as_ref().is_none_or(|s| s == *code))
        .flat_map(|code| measures.iter().map(move |m| (code.clone(), *m)))
        .collect())
}

/// Adaptive-normalization anomalies together with change-finder change
/// points.
pub fn detect_events(y: &TimeSeries, detection_p: usize, window: usize) -> Result<EventSet> {
    let anomalies = adaptive_normalization(y, detection_p)?;
    let changes = change_finder(y, detection_p, window)?;
    consolidate_events(&anomalies, &changes)
}

/// Events of one series, or the error that prevented detection.
#[derive(Debug, Clone)]
pub struct SeriesEvents {
    pub state: String,
    pub measure: Measure,
    pub events: std::result::Result<EventSet, String>,
}

pub fn cmd_events(dataset: &StateDataset, config: &RunConfig) -> Result<Vec<SeriesEvents>> {
    let jobs = jobs(dataset, config)?;
    Ok(jobs
        .par_iter()
        .map(|(state, measure)| {
            let (y, _) = dataset.states[state].series(*measure);
            SeriesEvents {
                state: state.clone(),
                measure: *measure,
                events: detect_events(y, config.detection_p, config.regression_window)
                    .map_err(|e| e.to_string()),
            }
        })
        .collect())
}

/// Flattens event sets into week-labelled rows: anomalies then change points
/// per series, each in index order.
pub fn event_rows(dataset: &StateDataset, events: &[SeriesEvents]) -> Vec<EventRow> {
    let mut rows = Vec::new();
    for se in events {
        let Ok(ev) = &se.events else { continue };
        for (kind, indices) in [
            (EventKind::Anomaly, &ev.anomalies),
            (EventKind::ChangePoint, &ev.change_points),
        ] {
            for &index in indices {
                let week = dataset
                    .weeks
                    .week_at(index)
                    .expect("event index lies on the week axis");
                rows.push(EventRow {
                    state: se.state.clone(),
                    measure: se.measure,
                    kind,
                    index,
                    year: week.year,
                    week: week.week,
                });
            }
        }
    }
    rows
}

/// Estimate output of one series.
#[derive(Debug, Clone)]
pub struct SeriesEstimate {
    pub row: ReportRow,
    pub result: Option<NoveltyResult>,
    pub events: Option<EventSet>,
}

impl SeriesEstimate {
    /// Plot of the analysed window with the baseline overlay.
    pub fn plot(&self, dataset: &StateDataset) -> SeriesPlot {
        let (y, _) = dataset.states[&self.row.state].series(self.row.measure);
        let horizon = self
            .result
            .as_ref()
            .map(|r| r.horizon)
            .unwrap_or_else(|| y.len());
        let mut plot = SeriesPlot {
            title: format!("{} {}", self.row.state, self.row.measure),
            values: y.values()[..horizon.min(y.len())].to_vec(),
            ..SeriesPlot::default()
        };
        if let Some(r) = &self.result {
            plot.baseline = Some((r.t, r.weeks.iter().map(|w| w.baseline).collect()));
        }
        if let Some(ev) = &self.events {
            plot.anomalies = ev.anomalies.clone();
            plot.change_points = ev.change_points.clone();
        }
        plot
    }
}

fn resolve_t(
    dataset: &StateDataset,
    y: &TimeSeries,
    config: &RunConfig,
    events: Option<&EventSet>,
) -> Result<usize> {
    match config.t {
        StartWeek::Index(t) => Ok(t),
        StartWeek::Auto { year } => {
            let ev = match events {
                Some(ev) => ev.clone(),
                None => detect_events(y, config.detection_p, config.regression_window)?,
            };
            ev.change_points
                .iter()
                .copied()
                .find(|&i| dataset.weeks.week_at(i).is_some_and(|w| w.year == year))
                .ok_or_else(|| Error::Domain(format!("no {year} change point")))
        }
    }
}

fn estimate_one(
    dataset: &StateDataset,
    reference: Option<&ReferenceTotals>,
    config: &RunConfig,
    state: &str,
    measure: Measure,
    with_events: bool,
) -> SeriesEstimate {
    let reference_total = reference.and_then(|r| r.get(state, measure));
    let (full, cov) = dataset.states[state].series(measure);
    let run = || -> Result<(NoveltyResult, Option<EventSet>)> {
        if full.len() < config.horizon {
            return Err(Error::Bounds(format!(
                "horizon {} exceeds the {} weeks of data",
                config.horizon,
                full.len()
            )));
        }
        let y = full.truncated(config.horizon)?;
        let events = if with_events || matches!(config.t, StartWeek::Auto { .. }) {
            Some(detect_events(&y, config.detection_p, config.regression_window)?)
        } else {
            None
        };
        let t = resolve_t(dataset, &y, config, events.as_ref())?;
        let seed = series_seed(config.seed, state, measure);
        let result = analyze(&y, &cov[..config.horizon], &config.novelty_config(t, seed))?;
        Ok((result, events))
    };
    match run() {
        Ok((result, events)) => {
            let gate = match result.withheld {
                Some(w) => Gate::Withheld(w),
                None => Gate::Passed,
            };
            let passed = gate == Gate::Passed;
            let row = ReportRow {
                state: state.to_string(),
                measure,
                cum_novelty: Some(result.cum_novelty),
                cum_reported: Some(result.cum_reported.round() as u64),
                rate: if passed { result.rate.rate } else { None },
                margin: passed.then_some(result.rate.margin),
                gate,
                reference_total,
            };
            SeriesEstimate {
                row,
                result: Some(result),
                events,
            }
        }
        Err(e) => SeriesEstimate {
            row: ReportRow::failed(state, measure, e.to_string(), reference_total),
            result: None,
            events: None,
        },
    }
}

/// Runs the full estimation for every selected series. Failures are kept in
/// their row; only an invalid configuration aborts the batch.
pub fn cmd_estimate(
    dataset: &StateDataset,
    reference: Option<&ReferenceTotals>,
    config: &RunConfig,
) -> Result<Vec<SeriesEstimate>> {
    estimate_with(dataset, reference, config, false)
}

/// As [`cmd_estimate`], additionally keeping the event sets for plotting.
pub fn estimate_with(
    dataset: &StateDataset,
    reference: Option<&ReferenceTotals>,
    config: &RunConfig,
    with_events: bool,
) -> Result<Vec<SeriesEstimate>> {
    config.validate()?;
    let jobs = jobs(dataset, config)?;
    Ok(jobs
        .par_iter()
        .map(|(state, measure)| {
            estimate_one(dataset, reference, config, state, *measure, with_events)
        })
        .collect())
}

pub fn rows(estimates: &[SeriesEstimate]) -> Vec<ReportRow> {
    estimates.iter().map(|e| e.row.clone()).collect()
}
