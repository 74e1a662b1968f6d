//! Report rows and their CSV, JSON and SVG renderings.

use std::fmt::{self, Write as _};
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::novelty::Withheld;
use crate::timeseries::Measure;

/// Column order of the estimate CSV; JSON objects use the same names.
pub const ESTIMATE_COLUMNS: [&str; 8] = [
    "state",
    "measure",
    "cum_novelty",
    "cum_reported",
    "rate",
    "margin",
    "gate",
    "reference_total",
];

pub const EVENT_COLUMNS: [&str; 6] = ["state", "measure", "kind", "index", "year", "week"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Domain(format!("unknown output format `{other}`"))),
        }
    }
}

/// Outcome of the significance gates for one row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Gate {
    Passed,
    Withheld(Withheld),
    /// The analysis of this series failed; the message says why.
    Error(String),
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Passed => f.write_str("ok"),
            Gate::Withheld(w) => f.write_str(w.code()),
            Gate::Error(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl From<Gate> for String {
    fn from(g: Gate) -> String {
        g.to_string()
    }
}

impl TryFrom<String> for Gate {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        Ok(match s.as_str() {
            "ok" => Gate::Passed,
            "°" => Gate::Withheld(Withheld::NoNovelty),
            "•" => Gate::Withheld(Withheld::NoUnderReport),
            "no-reported" => Gate::Withheld(Withheld::NoReported),
            other => match other.strip_prefix("error: ") {
                Some(msg) => Gate::Error(msg.to_string()),
                None => return Err(format!("unknown gate code `{other}`")),
            },
        })
    }
}

/// One (state, measure) line of the estimate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub state: String,
    pub measure: Measure,
    pub cum_novelty: Option<f64>,
    pub cum_reported: Option<u64>,
    /// Present only when both gates passed and something was reported.
    pub rate: Option<f64>,
    pub margin: Option<f64>,
    pub gate: Gate,
    pub reference_total: Option<u64>,
}

impl ReportRow {
    pub fn failed(state: &str, measure: Measure, message: String, reference: Option<u64>) -> Self {
        Self {
            state: state.to_string(),
            measure,
            cum_novelty: None,
            cum_reported: None,
            rate: None,
            margin: None,
            gate: Gate::Error(message),
            reference_total: reference,
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self.gate, Gate::Error(_))
    }
}

fn opt<T>(v: Option<T>, f: impl FnOnce(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

/// CSV with three decimals for rate and margin and whole-number novelty.
pub fn write_estimate_csv<W: Write>(rows: &[ReportRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ESTIMATE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.state.clone(),
            r.measure.to_string(),
            opt(r.cum_novelty, |v| format!("{v:.0}")),
            opt(r.cum_reported, |v| v.to_string()),
            opt(r.rate, |v| format!("{v:.3}")),
            opt(r.margin, |v| format!("{v:.3}")),
            r.gate.to_string(),
            opt(r.reference_total, |v| v.to_string()),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// JSON array with unrounded numbers.
pub fn write_estimate_json<W: Write>(rows: &[ReportRow], mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, rows)?;
    writeln!(writer).map_err(|e| Error::io("<json output>", e))?;
    Ok(())
}

pub fn write_estimate<W: Write>(rows: &[ReportRow], format: OutputFormat, writer: W) -> Result<()> {
    match format {
        OutputFormat::Csv => write_estimate_csv(rows, writer),
        OutputFormat::Json => write_estimate_json(rows, writer),
    }
}

pub fn parse_estimate_json(text: &str) -> Result<Vec<ReportRow>> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Anomaly,
    ChangePoint,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Anomaly => "anomaly",
            EventKind::ChangePoint => "change_point",
        })
    }
}

/// One detected event labelled with its epidemiological week.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRow {
    pub state: String,
    pub measure: Measure,
    pub kind: EventKind,
    pub index: usize,
    pub year: i32,
    pub week: u32,
}

pub fn write_events<W: Write>(rows: &[EventRow], format: OutputFormat, mut writer: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(EVENT_COLUMNS)?;
            for r in rows {
                w.write_record([
                    r.state.clone(),
                    r.measure.to_string(),
                    r.kind.to_string(),
                    r.index.to_string(),
                    r.year.to_string(),
                    r.week.to_string(),
                ])?;
            }
            w.flush().map_err(|e| Error::io("<csv output>", e))?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut writer, rows)?;
            writeln!(writer).map_err(|e| Error::io("<json output>", e))?;
        }
    }
    Ok(())
}

/// Everything drawn in one series plot. Indices are 1-based.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesPlot {
    pub title: String,
    pub values: Vec<f64>,
    /// First index and values of the baseline overlay.
    pub baseline: Option<(usize, Vec<f64>)>,
    pub anomalies: Vec<usize>,
    pub change_points: Vec<usize>,
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Observed line, baseline overlay, red anomaly dots and dotted gray
/// change-point verticals.
pub fn render_svg(plot: &SeriesPlot) -> String {
    let n = plot.values.len().max(2);
    let mut top = plot.values.iter().copied().fold(0.0, f64::max);
    if let Some((_, b)) = &plot.baseline {
        top = b.iter().copied().fold(top, f64::max);
    }
    let bottom = plot.values.iter().copied().fold(0.0, f64::min);
    let span = if top > bottom { top - bottom } else { 1.0 };
    let x = |i: usize| MARGIN + (i as f64 - 1.0) / (n as f64 - 1.0) * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - (v - bottom) / span * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(&plot.title)
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    );
    for &cp in &plot.change_points {
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.2}" y1="{MARGIN}" x2="{0:.2}" y2="{1}" stroke="gray" stroke-dasharray="2,3"/>"#,
            x(cp),
            HEIGHT - MARGIN
        );
    }
    let points = |first: usize, vals: &[f64]| {
        vals.iter()
            .enumerate()
            .map(|(k, v)| format!("{:.2},{:.2}", x(first + k), y(*v)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="black" stroke-width="1" points="{}"/>"#,
        points(1, &plot.values)
    );
    if let Some((first, b)) = &plot.baseline {
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" stroke-dasharray="4,2" points="{}"/>"#,
            points(*first, b)
        );
    }
    for &a in &plot.anomalies {
        if let Some(v) = plot.values.get(a.wrapping_sub(1)) {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="red"/>"#,
                x(a),
                y(*v)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `<dir>/<state>_<measure>.svg`.
pub fn write_svg(dir: &Path, state: &str, measure: Measure, plot: &SeriesPlot) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{state}_{measure}.svg"));
    std::fs::write(&path, render_svg(plot)).map_err(|e| Error::io(&path, e))
}
