//! Loading surveillance exports into aligned weekly series.
//!
//! Raw files are delimited text (comma or semicolon, chosen from the header
//! line) with a header row. A [`ColumnMapping`] names the source column of
//! every canonical field, so exports with other layouts can be read without
//! code changes. The canonical layout is
//! `year,week,state,measure,total,sars_cov_2`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{Measure, SeriesLabel, TimeSeries};

/// Federative unit codes accepted in reference files.
pub const STATE_CODES: [&str; 27] = [
    "AC", "AL", "AM", "AP", "BA", "CE", "DF", "ES", "GO", "MA", "MG", "MS", "MT", "PA", "PB",
    "PE", "PI", "PR", "RJ", "RN", "RO", "RR", "RS", "SC", "SE", "SP", "TO",
];

/// An epidemiological (year, week) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EpiWeek {
    pub year: i32,
    pub week: u32,
}

impl EpiWeek {
    pub fn new(year: i32, week: u32) -> Self {
        Self { year, week }
    }
}

impl fmt::Display for EpiWeek {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-W{:02}", self.year, self.week)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    /// 1-based line in the source file (header is line 1).
    pub line: usize,
    pub year: i32,
    pub week: u32,
    pub region: String,
    pub region_type: Option<String>,
    pub gender: Option<String>,
    pub scale: Option<String>,
    pub total: u64,
    pub sars_cov_2: u64,
    pub measure: Measure,
}

impl RawRecord {
    pub fn epi_week(&self) -> EpiWeek {
        EpiWeek::new(self.year, self.week)
    }
}

/// Source column names for each canonical field, plus the values that select
/// the kept rows and the spellings of the two measures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub year: String,
    pub week: String,
    pub region: String,
    pub region_type: Option<String>,
    pub gender: Option<String>,
    pub scale: Option<String>,
    pub measure: String,
    pub total: String,
    pub sars_cov_2: String,
    pub keep_region_type: String,
    pub keep_gender: String,
    pub keep_scale: String,
    pub cases_values: Vec<String>,
    pub deaths_values: Vec<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            year: "year".into(),
            week: "week".into(),
            region: "state".into(),
            region_type: None,
            gender: None,
            scale: None,
            measure: "measure".into(),
            total: "total".into(),
            sars_cov_2: "sars_cov_2".into(),
            keep_region_type: "State".into(),
            keep_gender: "Total".into(),
            keep_scale: "Cases".into(),
            cases_values: vec!["cases".into(), "case".into()],
            deaths_values: vec!["deaths".into(), "death".into()],
        }
    }
}

impl ColumnMapping {
    /// Parses `key=value` lines; `#` starts a comment.
    ///
    /// Column keys: `year`, `week`, `state`, `region_type`, `gender`,
    /// `scale`, `measure`, `total`, `sars_cov_2`. Selection keys:
    /// `region_type.keep`, `gender.keep`, `scale.keep`. Measure spellings:
    /// `measure.cases`, `measure.deaths` (comma-separated lists).
    pub fn parse(text: &str) -> Result<Self> {
        let mut m = ColumnMapping::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Ingest(format!("mapping line {}: expected key=value", n + 1))
            })?;
            let value = value.trim().to_string();
            let list = || {
                value
                    .split(',')
                    .map(|v| v.trim().to_string())
                    .filter(|v| !v.is_empty())
                    .collect::<Vec<_>>()
            };
            match key.trim() {
                "year" => m.year = value,
                "week" => m.week = value,
                "state" | "region" => m.region = value,
                "region_type" => m.region_type = Some(value),
                "gender" => m.gender = Some(value),
                "scale" => m.scale = Some(value),
                "measure" => m.measure = value,
                "total" => m.total = value,
                "sars_cov_2" => m.sars_cov_2 = value,
                "region_type.keep" => m.keep_region_type = value,
                "gender.keep" => m.keep_gender = value,
                "scale.keep" => m.keep_scale = value,
                "measure.cases" => m.cases_values = list(),
                "measure.deaths" => m.deaths_values = list(),
                other => {
                    return Err(Error::Ingest(format!(
                        "mapping line {}: unknown key `{other}`",
                        n + 1
                    )))
                }
            }
        }
        Ok(m)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn measure_of(&self, value: &str) -> Option<Measure> {
        let v = value.trim();
        if self.cases_values.iter().any(|c| c.eq_ignore_ascii_case(v)) {
            Some(Measure::Cases)
        } else if self.deaths_values.iter().any(|c| c.eq_ignore_ascii_case(v)) {
            Some(Measure::Deaths)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectCode {
    WeekOutOfRange,
    ReportedExceedsTotal,
    UnparseableField,
    UnknownMeasure,
    ShortRow,
}

impl RejectCode {
    pub fn reason(self) -> &'static str {
        match self {
            RejectCode::WeekOutOfRange => "week out of range",
            RejectCode::ReportedExceedsTotal => "reported exceeds total",
            RejectCode::UnparseableField => "unparseable field",
            RejectCode::UnknownMeasure => "unknown measure",
            RejectCode::ShortRow => "short row",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: usize,
    pub code: RejectCode,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawLoad {
    pub records: Vec<RawRecord>,
    pub rejects: Vec<Reject>,
}

/// Comma unless the header line holds more semicolons than commas.
pub fn detect_delimiter(header: &str) -> u8 {
    let semis = header.matches(';').count();
    let commas = header.matches(',').count();
    if semis > commas {
        b';'
    } else {
        b','
    }
}

pub fn load_raw(path: &Path, mapping: &ColumnMapping) -> Result<RawLoad> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_raw(file, &path.display().to_string(), mapping)
}

/// Reads raw records from any reader; `source` names it in error messages.
pub fn read_raw<R: Read>(mut reader: R, source: &str, mapping: &ColumnMapping) -> Result<RawLoad> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::io(source, e))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let header_line = text.lines().next().unwrap_or("");
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(header_line))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = csv.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: source.to_string(),
                column: name.to_string(),
            })
    };
    let optional = |name: &Option<String>| -> Result<Option<usize>> {
        name.as_deref().map(column).transpose()
    };
    let cols = Columns {
        year: column(&mapping.year)?,
        week: column(&mapping.week)?,
        region: column(&mapping.region)?,
        measure: column(&mapping.measure)?,
        total: column(&mapping.total)?,
        sars_cov_2: column(&mapping.sars_cov_2)?,
        region_type: optional(&mapping.region_type)?,
        gender: optional(&mapping.gender)?,
        scale: optional(&mapping.scale)?,
    };

    let mut load = RawLoad::default();
    for (k, row) in csv.records().enumerate() {
        let line = k + 2;
        let row = row?;
        match parse_row(&row, &cols, mapping, line) {
            Ok(record) => load.records.push(record),
            Err(reject) => load.rejects.push(reject),
        }
    }
    Ok(load)
}

struct Columns {
    year: usize,
    week: usize,
    region: usize,
    measure: usize,
    total: usize,
    sars_cov_2: usize,
    region_type: Option<usize>,
    gender: Option<usize>,
    scale: Option<usize>,
}

fn parse_count(value: &str) -> Option<u64> {
    if let Ok(v) = value.parse::<u64>() {
        return Some(v);
    }
    // some exports write counts as "12.0"
    let f: f64 = value.parse().ok()?;
    (f >= 0.0 && f.fract() == 0.0 && f < 9.0e15).then_some(f as u64)
}

fn parse_row(
    row: &csv::StringRecord,
    cols: &Columns,
    mapping: &ColumnMapping,
    line: usize,
) -> std::result::Result<RawRecord, Reject> {
    let reject = |code: RejectCode, detail: String| Reject { line, code, detail };
    let field = |idx: usize, name: &str| {
        row.get(idx).ok_or_else(|| {
            reject(RejectCode::ShortRow, format!("no value for column `{name}`"))
        })
    };
    let bad = |name: &str, value: &str| {
        reject(
            RejectCode::UnparseableField,
            format!("column `{name}` has value `{value}`"),
        )
    };

    let year_s = field(cols.year, &mapping.year)?;
    let year: i32 = year_s.parse().map_err(|_| bad(&mapping.year, year_s))?;
    let week_s = field(cols.week, &mapping.week)?;
    let week: u32 = week_s.parse().map_err(|_| bad(&mapping.week, week_s))?;
    if !(1..=53).contains(&week) {
        return Err(reject(
            RejectCode::WeekOutOfRange,
            format!("week {week} not in 1..=53"),
        ));
    }
    let region = field(cols.region, &mapping.region)?.to_string();
    let measure_s = field(cols.measure, &mapping.measure)?;
    let measure = mapping.measure_of(measure_s).ok_or_else(|| {
        reject(RejectCode::UnknownMeasure, format!("measure `{measure_s}`"))
    })?;
    let total_s = field(cols.total, &mapping.total)?;
    let total = parse_count(total_s).ok_or_else(|| bad(&mapping.total, total_s))?;
    let cov_s = field(cols.sars_cov_2, &mapping.sars_cov_2)?;
    let sars_cov_2 = parse_count(cov_s).ok_or_else(|| bad(&mapping.sars_cov_2, cov_s))?;
    if sars_cov_2 > total {
        return Err(reject(
            RejectCode::ReportedExceedsTotal,
            format!("reported {sars_cov_2} > total {total}"),
        ));
    }
    let opt = |idx: Option<usize>, name: &Option<String>| -> std::result::Result<Option<String>, Reject> {
        match (idx, name) {
            (Some(i), Some(n)) => Ok(Some(field(i, n)?.to_string())),
            _ => Ok(None),
        }
    };
    Ok(RawRecord {
        line,
        year,
        week,
        region,
        region_type: opt(cols.region_type, &mapping.region_type)?,
        gender: opt(cols.gender, &mapping.gender)?,
        scale: opt(cols.scale, &mapping.scale)?,
        total,
        sars_cov_2,
        measure,
    })
}

/// Counts of rows dropped by the selection filter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterCounts {
    pub kept: usize,
    pub excluded_region_type: usize,
    pub excluded_gender: usize,
    pub excluded_scale: usize,
}

/// Which values of the selection columns are kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub region_type: String,
    pub gender: String,
    pub scale: String,
}

impl Default for Selection {
    fn default() -> Self {
        Self::from(&ColumnMapping::default())
    }
}

impl From<&ColumnMapping> for Selection {
    fn from(m: &ColumnMapping) -> Self {
        Self {
            region_type: m.keep_region_type.clone(),
            gender: m.keep_gender.clone(),
            scale: m.keep_scale.clone(),
        }
    }
}

/// Keeps state-level, all-gender, case-scale rows. Absent selection columns
/// always match.
pub fn filter_records(records: &[RawRecord], selection: &Selection) -> (Vec<RawRecord>, FilterCounts) {
    let matches = |value: &Option<String>, keep: &str| {
        value
            .as_deref()
            .is_none_or(|v| v.trim().eq_ignore_ascii_case(keep))
    };
    let mut counts = FilterCounts::default();
    let mut kept = Vec::with_capacity(records.len());
    for r in records {
        if !matches(&r.region_type, &selection.region_type) {
            counts.excluded_region_type += 1;
        } else if !matches(&r.gender, &selection.gender) {
            counts.excluded_gender += 1;
        } else if !matches(&r.scale, &selection.scale) {
            counts.excluded_scale += 1;
        } else {
            counts.kept += 1;
            kept.push(r.clone());
        }
    }
    (kept, counts)
}

/// The sorted weeks present in a dataset; positions are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WeekAxis {
    weeks: Vec<EpiWeek>,
}

impl WeekAxis {
    pub fn new(weeks: impl IntoIterator<Item = EpiWeek>) -> Self {
        let set: BTreeSet<EpiWeek> = weeks.into_iter().collect();
        Self {
            weeks: set.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weeks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weeks.is_empty()
    }

    pub fn weeks(&self) -> &[EpiWeek] {
        &self.weeks
    }

    /// First week of the axis.
    pub fn origin(&self) -> Option<EpiWeek> {
        self.weeks.first().copied()
    }

    pub fn index_of(&self, week: EpiWeek) -> Result<usize> {
        self.weeks
            .binary_search(&week)
            .map(|k| k + 1)
            .map_err(|_| Error::UnknownWeek {
                year: week.year,
                week: week.week,
            })
    }

    pub fn week_at(&self, i: usize) -> Option<EpiWeek> {
        i.checked_sub(1).and_then(|k| self.weeks.get(k)).copied()
    }
}

/// Cases and deaths of one state with their reported counterparts.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSeries {
    pub cases: TimeSeries,
    pub cases_reported: Vec<f64>,
    pub deaths: TimeSeries,
    pub deaths_reported: Vec<f64>,
}

impl StateSeries {
    pub fn series(&self, measure: Measure) -> (&TimeSeries, &[f64]) {
        match measure {
            Measure::Cases => (&self.cases, &self.cases_reported),
            Measure::Deaths => (&self.deaths, &self.deaths_reported),
        }
    }
}

/// A zero-filled (state, measure, week) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Imputation {
    pub state: String,
    pub measure: Measure,
    pub week: EpiWeek,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub counts: FilterCounts,
    pub imputed: Vec<Imputation>,
}

/// Per-state aligned weekly series over a shared week axis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDataset {
    pub weeks: WeekAxis,
    pub states: BTreeMap<String, StateSeries>,
}

impl StateDataset {
    pub fn state(&self, code: &str) -> Option<&StateSeries> {
        self.states.get(code)
    }

    /// Builds a dataset from already aligned values, mostly for synthetic
    /// runs. Every vector must have one entry per axis week.
    pub fn from_series(
        weeks: WeekAxis,
        states: impl IntoIterator<Item = (String, [Vec<f64>; 4])>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (code, [cases, cases_reported, deaths, deaths_reported]) in states {
            for (name, v) in [
                ("cases", &cases),
                ("cases_reported", &cases_reported),
                ("deaths", &deaths),
                ("deaths_reported", &deaths_reported),
            ] {
                if v.len() != weeks.len() {
                    return Err(Error::Ingest(format!(
                        "state {code}: {name} has {} weeks, axis has {}",
                        v.len(),
                        weeks.len()
                    )));
                }
            }
            let series = StateSeries {
                cases: TimeSeries::new(SeriesLabel::new(code.clone(), Measure::Cases), cases)?,
                cases_reported,
                deaths: TimeSeries::new(SeriesLabel::new(code.clone(), Measure::Deaths), deaths)?,
                deaths_reported,
            };
            map.insert(code, series);
        }
        Ok(Self {
            weeks,
            states: map,
        })
    }
}

/// Filters records and pivots them into weekly series per state and
/// measure. Missing cells are zero-filled and listed in the report.
pub fn filter_and_split(
    records: &[RawRecord],
    selection: &Selection,
) -> Result<(StateDataset, FilterReport)> {
    let (kept, counts) = filter_records(records, selection);
    let axis = WeekAxis::new(kept.iter().map(RawRecord::epi_week));
    let mut cells: BTreeMap<(String, Measure, EpiWeek), (u64, u64)> = BTreeMap::new();
    for r in &kept {
        let key = (r.region.clone(), r.measure, r.epi_week());
        if cells.insert(key, (r.total, r.sars_cov_2)).is_some() {
            return Err(Error::Ingest(format!(
                "duplicate record for state {} {} {} (line {})",
                r.region,
                r.epi_week(),
                r.measure,
                r.line
            )));
        }
    }
    let states: BTreeSet<&str> = kept.iter().map(|r| r.region.as_str()).collect();
    let mut imputed = Vec::new();
    let mut rows = Vec::with_capacity(states.len());
    for state in states {
        let mut columns: [Vec<f64>; 4] = Default::default();
        for (slot, measure) in Measure::ALL.into_iter().enumerate() {
            for &week in axis.weeks() {
                let key = (state.to_string(), measure, week);
                let (total, reported) = match cells.get(&key) {
                    Some(&(t, c)) => (t as f64, c as f64),
                    None => {
                        imputed.push(Imputation {
                            state: state.to_string(),
                            measure,
                            week,
                        });
                        (0.0, 0.0)
                    }
                };
                columns[2 * slot].push(total);
                columns[2 * slot + 1].push(reported);
            }
        }
        rows.push((state.to_string(), columns));
    }
    let dataset = StateDataset::from_series(axis, rows)?;
    Ok((dataset, FilterReport { counts, imputed }))
}

/// 1-based position of `(year, week)` in the dataset's own week sequence.
pub fn week_index(dataset: &StateDataset, year: i32, week: u32) -> Result<usize> {
    dataset.weeks.index_of(EpiWeek::new(year, week))
}

/// Writes the dataset in the canonical layout, one row per
/// (state, measure, week).
pub fn write_canonical<W: Write>(dataset: &StateDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["year", "week", "state", "measure", "total", "sars_cov_2"])?;
    for (code, s) in &dataset.states {
        for measure in Measure::ALL {
            let (y, cov) = s.series(measure);
            for (k, week) in dataset.weeks.weeks().iter().enumerate() {
                w.write_record([
                    week.year.to_string(),
                    week.week.to_string(),
                    code.clone(),
                    measure.to_string(),
                    y.values()[k].to_string(),
                    cov[k].to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<canonical output>", e))?;
    Ok(())
}

/// Writes rejects as tab-separated `line, code, detail` records.
pub fn write_rejects<W: Write>(rejects: &[Reject], mut writer: W) -> std::io::Result<()> {
    for r in rejects {
        writeln!(writer, "{}\t{}\t{}", r.line, r.code.reason(), r.detail)?;
    }
    Ok(())
}

/// Writes zero-filled cells as tab-separated `state, measure, week` records.
pub fn write_imputations<W: Write>(imputed: &[Imputation], mut writer: W) -> std::io::Result<()> {
    for i in imputed {
        writeln!(writer, "{}\t{}\t{}\tzero-filled", i.state, i.measure, i.week)?;
    }
    Ok(())
}

/// Cumulative confirmed counts per state from an external source.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceTotals {
    totals: BTreeMap<String, (u64, u64)>,
}

impl ReferenceTotals {
    pub fn get(&self, state: &str, measure: Measure) -> Option<u64> {
        self.totals.get(state).map(|&(c, d)| match measure {
            Measure::Cases => c,
            Measure::Deaths => d,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }
}

pub fn load_reference(path: &Path) -> Result<ReferenceTotals> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_reference(file, &path.display().to_string())
}

/// Reads `state, cases, deaths` columns. An empty input yields no totals.
pub fn read_reference<R: Read>(mut reader: R, source: &str) -> Result<ReferenceTotals> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::io(source, e))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    if text.trim().is_empty() {
        return Ok(ReferenceTotals::default());
    }
    let header_line = text.lines().next().unwrap_or("");
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(header_line))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = csv.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::MissingColumn {
                path: source.to_string(),
                column: name.to_string(),
            })
    };
    let (sc, cc, dc) = (column("state")?, column("cases")?, column("deaths")?);
    let mut totals = BTreeMap::new();
    for (k, row) in csv.records().enumerate() {
        let row = row?;
        let line = k + 2;
        let state = row.get(sc).unwrap_or("").to_string();
        if !STATE_CODES.contains(&state.as_str()) {
            return Err(Error::Ingest(format!(
                "{source} line {line}: unknown state code `{state}`"
            )));
        }
        let count = |idx: usize, name: &str| -> Result<u64> {
            let v = row.get(idx).unwrap_or("");
            let parsed: i64 = v.parse().map_err(|_| {
                Error::Ingest(format!("{source} line {line}: {name} `{v}` is not an integer"))
            })?;
            u64::try_from(parsed).map_err(|_| {
                Error::Ingest(format!("{source} line {line}: negative {name} count {parsed}"))
            })
        };
        totals.insert(state, (count(cc, "cases")?, count(dc, "deaths")?));
    }
    Ok(ReferenceTotals { totals })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "\
year,week,state,measure,total,sars_cov_2
2020,1,SP,cases,10,0
2020,2,SP,cases,12,1
2020,3,SP,cases,15,4
";

    fn load(text: &str) -> RawLoad {
        read_raw(text.as_bytes(), "fixture", &ColumnMapping::default()).unwrap()
    }

    #[test]
    fn well_formed_rows() {
        let l = load(FIXTURE);
        assert_eq!(l.records.len(), 3);
        assert!(l.rejects.is_empty());
        assert_eq!(l.records[2].total, 15);
        assert_eq!(l.records[2].line, 4);
    }

    #[test]
    fn week_zero_rejected() {
        let l = load("year,week,state,measure,total,sars_cov_2\n2020,0,SP,cases,1,0\n");
        assert_eq!(l.rejects.len(), 1);
        assert_eq!(l.rejects[0].code.reason(), "week out of range");
    }

    #[test]
    fn reported_above_total_rejected() {
        let l = load("year,week,state,measure,total,sars_cov_2\n2020,4,SP,deaths,1,3\n");
        assert_eq!(l.rejects[0].code.reason(), "reported exceeds total");
        assert!(l.records.is_empty());
    }

    #[test]
    fn semicolon_files_are_detected() {
        let l = load("year;week;state;measure;total;sars_cov_2\n2020;4;RJ;deaths;3;1\n");
        assert_eq!(l.records.len(), 1);
        assert_eq!(l.records[0].measure, Measure::Deaths);
    }

    #[test]
    fn missing_column_is_fatal() {
        let err = read_raw(
            "year,week,state,measure,total\n".as_bytes(),
            "x.csv",
            &ColumnMapping::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("sars_cov_2"), "{err}");
    }

    #[test]
    fn mapping_file_renames_columns() {
        let mapping = ColumnMapping::parse(
            "# infogripe export\nyear=Ano\nweek=Semana\nstate=UF\nmeasure=dado\n\
             total=Total\nsars_cov_2=SARS-CoV-2\ngender=sexo\ngender.keep=Total\n\
             measure.cases=srag\nmeasure.deaths=obito\n",
        )
        .unwrap();
        let text = "Ano;Semana;UF;dado;sexo;Total;SARS-CoV-2\n\
                    2020;1;AM;srag;Total;5;1\n2020;1;AM;srag;F;3;0\n2020;1;AM;obito;Total;2;0\n";
        let l = read_raw(text.as_bytes(), "raw", &mapping).unwrap();
        assert_eq!(l.records.len(), 3);
        let (ds, report) = filter_and_split(&l.records, &Selection::from(&mapping)).unwrap();
        assert_eq!(report.counts.excluded_gender, 1);
        let am = ds.state("AM").unwrap();
        assert_eq!(am.cases.values(), &[5.0]);
        assert_eq!(am.deaths.values(), &[2.0]);
        assert!(ColumnMapping::parse("bogus=1").is_err());
    }

    #[test]
    fn pivot_two_states_with_gap() {
        let mut text = String::from("year,week,state,measure,total,sars_cov_2\n");
        for st in ["BA", "CE"] {
            for w in 1..=4 {
                if st == "CE" && w == 3 {
                    continue;
                }
                text.push_str(&format!("2019,{w},{st},cases,{w},0\n"));
                text.push_str(&format!("2019,{w},{st},deaths,1,0\n"));
            }
        }
        let l = load(&text);
        let (ds, report) = filter_and_split(&l.records, &Selection::default()).unwrap();
        assert_eq!(ds.states.len(), 2);
        assert_eq!(ds.weeks.len(), 4);
        assert_eq!(ds.state("CE").unwrap().cases.values(), &[1.0, 2.0, 0.0, 4.0]);
        assert_eq!(report.imputed.len(), 2);
        assert_eq!(report.imputed[0].week, EpiWeek::new(2019, 3));
    }

    #[test]
    fn duplicates_are_fatal() {
        let l = load(
            "year,week,state,measure,total,sars_cov_2\n2020,1,SP,cases,1,0\n2020,1,SP,cases,2,0\n",
        );
        let err = filter_and_split(&l.records, &Selection::default()).unwrap_err();
        assert!(err.to_string().contains("SP 2020-W01 cases"), "{err}");
    }

    #[test]
    fn week_positions() {
        let l = load(
            "year,week,state,measure,total,sars_cov_2\n\
             2009,2,SP,cases,1,0\n2009,1,SP,cases,1,0\n2009,53,SP,cases,1,0\n2010,1,SP,cases,1,0\n",
        );
        let (ds, _) = filter_and_split(&l.records, &Selection::default()).unwrap();
        assert_eq!(week_index(&ds, 2009, 1).unwrap(), 1);
        assert_eq!(week_index(&ds, 2009, 2).unwrap(), 2);
        assert_eq!(week_index(&ds, 2010, 1).unwrap(), 4);
        assert!(matches!(week_index(&ds, 2009, 3), Err(Error::UnknownWeek { .. })));
        assert_eq!(ds.weeks.origin(), Some(EpiWeek::new(2009, 1)));
    }

    #[test]
    fn reference_totals() {
        let r = read_reference("state,cases,deaths\nSP,31174,2586\n".as_bytes(), "ref").unwrap();
        assert_eq!(r.get("SP", Measure::Cases), Some(31174));
        assert_eq!(r.get("SP", Measure::Deaths), Some(2586));
        assert_eq!(r.get("RJ", Measure::Cases), None);
        assert!(read_reference("".as_bytes(), "ref").unwrap().is_empty());
        let err = read_reference("state,cases,deaths\nSP,-1,0\n".as_bytes(), "ref").unwrap_err();
        assert!(err.to_string().contains("negative"), "{err}");
        let err = read_reference("state,cases,deaths\nXX,1,0\n".as_bytes(), "ref").unwrap_err();
        assert!(err.to_string().contains("XX"), "{err}");
    }
}
