use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use underreport::ingest::{
    filter_and_split, load_raw, load_reference, write_imputations, write_rejects, ColumnMapping,
    Selection, StateDataset,
};
use underreport::novelty::NoveltyGateForm;
use underreport::pipeline::{
    cmd_events, estimate_with, event_rows, rows, RunConfig, StartWeek,
};
use underreport::report::{write_estimate, write_events, write_svg, OutputFormat, SeriesPlot};
use underreport::stats::Alternative;
use underreport::timeseries::Measure;
use underreport::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_INGEST: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "underreport",
    version,
    about = "Rupture detection and under-reporting estimation for weekly surveillance series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect anomalies and change points per state and measure.
    Events(EventsArgs),
    /// Estimate novelty and under-reporting rates per state and measure.
    Estimate(EstimateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureArg {
    Cases,
    Deaths,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SidedArg {
    TwoSided,
    Greater,
    Less,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoveltyGateArg {
    OneSample,
    Paired,
}

#[derive(Args)]
struct InputArgs {
    /// Surveillance CSV (comma or semicolon separated).
    #[arg(long)]
    data: PathBuf,
    /// key=value file mapping source columns to canonical fields.
    #[arg(long)]
    mapping: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    measure: MeasureArg,
    /// State code, or `all`.
    #[arg(long, default_value = "all")]
    state: String,
    /// Write rejected input rows here.
    #[arg(long)]
    rejects: Option<PathBuf>,
    /// Write the list of zero-filled weeks here.
    #[arg(long)]
    imputations: Option<PathBuf>,
}

#[derive(Args)]
struct DetectionArgs {
    /// Moving-average term count used by the detectors.
    #[arg(long = "detect-p", default_value_t = 30)]
    detect_p: usize,
    /// Regression window of the change finder.
    #[arg(long, default_value_t = 30)]
    window: usize,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for one SVG per state and measure.
    #[arg(long)]
    plots: Option<PathBuf>,
}

#[derive(Args)]
struct EventsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    detection: DetectionArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Reference cumulative totals (state, cases, deaths).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Seasonal predecessors in the baseline.
    #[arg(long, default_value_t = 4)]
    p: usize,
    /// Season length in weeks.
    #[arg(long, default_value_t = 52)]
    s: usize,
    /// Rupture week index, or `auto` for the first change point of --auto-year.
    #[arg(long, default_value = "584")]
    t: String,
    #[arg(long = "auto-year", default_value_t = 2020)]
    auto_year: i32,
    /// Last week analysed.
    #[arg(long, default_value_t = 590)]
    horizon: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "two-sided")]
    sided: SidedArg,
    #[arg(long = "novelty-gate", value_enum, default_value = "one-sample")]
    novelty_gate: NoveltyGateArg,
    /// Seasons before t whose residuals form the noise sample.
    #[arg(long = "noise-cycles", default_value_t = 4)]
    noise_cycles: usize,
    #[command(flatten)]
    detection: DetectionArgs,
    #[command(flatten)]
    output: OutputArgs,
}

enum Failure {
    Config(String),
    Ingest(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Bounds(_) | Error::Domain(_) => Failure::Config(e.to_string()),
            other => Failure::Ingest(other.to_string()),
        }
    }
}

fn measures(arg: MeasureArg) -> Vec<Measure> {
    match arg {
        MeasureArg::Cases => vec![Measure::Cases],
        MeasureArg::Deaths => vec![Measure::Deaths],
        MeasureArg::Both => Measure::ALL.to_vec(),
    }
}

fn format(arg: FormatArg) -> OutputFormat {
    match arg {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    }
}

fn write_report(path: &Path, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    let mut file = File::create(path)
        .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
    f(&mut file).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
}

fn ingest(input: &InputArgs) -> Result<StateDataset, Failure> {
    let mapping = match &input.mapping {
        Some(p) => ColumnMapping::from_file(p).map_err(|e| Failure::Ingest(e.to_string()))?,
        None => ColumnMapping::default(),
    };
    let raw = load_raw(&input.data, &mapping).map_err(|e| Failure::Ingest(e.to_string()))?;
    if !raw.rejects.is_empty() {
        eprintln!("{} input rows rejected", raw.rejects.len());
    }
    if let Some(path) = &input.rejects {
        write_report(path, |w| write_rejects(&raw.rejects, w))?;
    }
    let (dataset, report) = filter_and_split(&raw.records, &Selection::from(&mapping))
        .map_err(|e| Failure::Ingest(e.to_string()))?;
    if let Some(path) = &input.imputations {
        write_report(path, |w| write_imputations(&report.imputed, w))?;
    }
    if dataset.states.is_empty() {
        return Err(Failure::Ingest(format!(
            "no usable records in {}",
            input.data.display()
        )));
    }
    Ok(dataset)
}

fn base_config(input: &InputArgs, detection: &DetectionArgs) -> RunConfig {
    RunConfig {
        detection_p: detection.detect_p,
        regression_window: detection.window,
        measures: measures(input.measure),
        state: (!input.state.eq_ignore_ascii_case("all")).then(|| input.state.to_uppercase()),
        ..RunConfig::default()
    }
}

fn open_sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| {
            Failure::Config(format!("cannot write {}: {e}", path.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sink_error(out: &Option<PathBuf>, e: impl std::fmt::Display) -> Failure {
    let name = out
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "<stdout>".into());
    Failure::Config(format!("cannot write {name}: {e}"))
}

fn run_events(args: EventsArgs) -> Result<bool, Failure> {
    let dataset = ingest(&args.input)?;
    let config = base_config(&args.input, &args.detection);
    let events = cmd_events(&dataset, &config)?;
    let mut partial = false;
    for se in &events {
        if let Err(msg) = &se.events {
            partial = true;
            eprintln!("{} {}: {msg}", se.state, se.measure);
        }
    }
    let rows = event_rows(&dataset, &events);
    let mut sink = open_sink(&args.output.out)?;
    write_events(&rows, format(args.output.format), &mut sink)
        .map_err(|e| sink_error(&args.output.out, e))?;
    sink.flush().map_err(|e| sink_error(&args.output.out, e))?;
    if let Some(dir) = &args.output.plots {
        for se in &events {
            let Ok(ev) = &se.events else { continue };
            let (y, _) = dataset.states[&se.state].series(se.measure);
            let plot = SeriesPlot {
                title: format!("{} {}", se.state, se.measure),
                values: y.values().to_vec(),
                baseline: None,
                anomalies: ev.anomalies.clone(),
                change_points: ev.change_points.clone(),
            };
            write_svg(dir, &se.state, se.measure, &plot).map_err(|e| Failure::Config(e.to_string()))?;
        }
    }
    Ok(partial)
}

fn run_estimate(args: EstimateArgs) -> Result<bool, Failure> {
    let t = if args.t.eq_ignore_ascii_case("auto") {
        StartWeek::Auto {
            year: args.auto_year,
        }
    } else {
        StartWeek::Index(
            args.t
                .parse()
                .map_err(|_| Failure::Config(format!("--t expects an index or `auto`, got `{}`", args.t)))?,
        )
    };
    let config = RunConfig {
        p: args.p,
        s: args.s,
        t,
        horizon: args.horizon,
        reps: args.reps,
        level: args.level,
        alpha: args.alpha,
        seed: args.seed,
        alternative: match args.sided {
            SidedArg::TwoSided => Alternative::TwoSided,
            SidedArg::Greater => Alternative::Greater,
            SidedArg::Less => Alternative::Less,
        },
        novelty_gate: match args.novelty_gate {
            NoveltyGateArg::OneSample => NoveltyGateForm::OneSample,
            NoveltyGateArg::Paired => NoveltyGateForm::Paired,
        },
        noise_cycles: args.noise_cycles,
        ..base_config(&args.input, &args.detection)
    };
    config.validate()?;
    let reference = match &args.reference {
        Some(p) => Some(load_reference(p).map_err(|e| Failure::Ingest(e.to_string()))?),
        None => None,
    };
    let dataset = ingest(&args.input)?;
    let estimates = estimate_with(
        &dataset,
        reference.as_ref(),
        &config,
        args.output.plots.is_some(),
    )?;
    let rows = rows(&estimates);
    let mut sink = open_sink(&args.output.out)?;
    write_estimate(&rows, format(args.output.format), &mut sink)
        .map_err(|e| sink_error(&args.output.out, e))?;
    sink.flush().map_err(|e| sink_error(&args.output.out, e))?;
    if let Some(dir) = &args.output.plots {
        for est in &estimates {
            write_svg(dir, &est.row.state, est.row.measure, &est.plot(&dataset))
                .map_err(|e| Failure::Config(e.to_string()))?;
        }
    }
    let partial = rows.iter().any(|r| r.is_error());
    for r in rows.iter().filter(|r| r.is_error()) {
        eprintln!("{} {}: {}", r.state, r.measure, r.gate);
    }
    Ok(partial)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Events(args) => run_events(args),
        Command::Estimate(args) => run_estimate(args),
    };
    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_PARTIAL),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Ingest(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INGEST)
        }
    }
}
