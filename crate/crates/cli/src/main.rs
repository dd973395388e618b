//! `pulse`: estimate on CSV data, simulate from a linear SEM, run experiment grids.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pulse_core::experiments::{self, Design, ExperimentConfig};
use pulse_core::{
    center, load_csv, sem, weak_instrument_stat, ColumnSchema, Dataset, DesignView, EstimatorSpec, Intervention,
    ModelPartition, PulseConfig, Roles, Scaling, SemModel, SemSpec, TestConfig,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "pulse", version, about = "Instrumental-variable estimation with PULSE and k-class estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one or more estimators to a CSV file.
    Estimate(EstimateArgs),
    /// Draw a sample from a SEM description.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo design and write result tables.
    Experiment(ExperimentArgs),
    /// Report identification and instrument strength.
    Diagnose(SchemaArgs),
}

#[derive(Args, Clone)]
struct SchemaArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: String,
    #[arg(long, value_delimiter = ',', required = true)]
    endogenous: Vec<String>,
    /// Exogenous columns that also enter the regression.
    #[arg(long, value_delimiter = ',')]
    included_exogenous: Vec<String>,
    /// Excluded exogenous columns.
    #[arg(long, value_delimiter = ',')]
    instruments: Vec<String>,
    /// Mean-centre every column (the default).
    #[arg(long, conflicts_with = "intercept")]
    center: bool,
    /// Add a constant column as an included exogenous regressor instead of centring.
    #[arg(long)]
    intercept: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    Ar,
    Plain,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    schema: SchemaArgs,
    /// ols, tsls, kclass:K, anchor:L, liml, fuller:A, modified-tsls or pulse. Repeat or separate by commas.
    #[arg(long, value_delimiter = ',', default_value = "ols,tsls,fuller:4,pulse")]
    estimator: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    pmin: f64,
    #[arg(long, value_enum, default_value = "ar")]
    scaling: ScalingArg,
    #[arg(long, default_value_t = pulse_core::pulse::DEFAULT_PRECISION)]
    precision: u64,
    /// Estimator used when TSLS is rejected, or `none` to fail instead.
    #[arg(long, default_value = "fuller:4")]
    fallback: String,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// SEM description (JSON).
    #[arg(long)]
    sem: PathBuf,
    /// Number of rows.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Intervention on the anchors (JSON).
    #[arg(long)]
    intervene: Option<PathBuf>,
    /// Output CSV; the manifest is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration (JSON).
    #[arg(long, conflicts_with = "design", required_unless_present = "design")]
    config: Option<PathBuf>,
    /// Built-in design: robustness-e1, univariate, mv-random, mv-fixed or underid-e3.
    #[arg(long)]
    design: Option<String>,
    /// Repetitions per cell (1000 for built-in designs).
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when unset.
    #[arg(long, env = "PULSE_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(pulse_core::Error),
}

impl From<pulse_core::Error> for Failure {
    fn from(e: pulse_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        use pulse_core::ErrorKind;
        match self {
            Failure::Usage(_) => 2,
            Failure::Core(pulse_core::Error::DualInfeasible) => 5,
            Failure::Core(e) => match e.kind() {
                ErrorKind::Input => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Core(pulse_core::Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Config files are user input: a malformed one is a usage error.
fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

/// Loaded data with A ordered as `[const?] included-exogenous instruments`.
struct Prepared {
    data: Dataset,
    partition: ModelPartition,
    preprocessing: &'static str,
}

fn prepare(args: &SchemaArgs) -> CliResult<Prepared> {
    let mut exogenous = args.included_exogenous.clone();
    exogenous.extend(args.instruments.iter().cloned());
    if exogenous.is_empty() {
        return Err(Failure::Usage("at least one of --included-exogenous or --instruments is required".into()));
    }
    let schema = ColumnSchema { target: args.target.clone(), endogenous: args.endogenous.clone(), exogenous };
    let raw = load_csv(&args.data, &schema)?;
    let k = args.included_exogenous.len();
    let (data, included, preprocessing) = if args.intercept {
        (raw.with_intercept(), (0..=k).collect(), "intercept")
    } else {
        (center(&raw, Roles::ALL), (0..k).collect(), "centered")
    };
    let partition = ModelPartition::new((0..data.d()).collect(), included);
    partition.validate(data.d(), data.q())?;
    Ok(Prepared { data, partition, preprocessing })
}

enum Choice {
    Standard(EstimatorSpec),
    Pulse,
}

fn parse_estimator(s: &str) -> CliResult<Choice> {
    if s.trim().eq_ignore_ascii_case("pulse") {
        return Ok(Choice::Pulse);
    }
    s.parse::<EstimatorSpec>().map(Choice::Standard).map_err(|e| Failure::Usage(e.to_string()))
}

fn cmd_estimate(args: &EstimateArgs) -> CliResult<()> {
    let choices = args.estimator.iter().map(|s| parse_estimator(s)).collect::<CliResult<Vec<_>>>()?;
    let fallback = if args.fallback.eq_ignore_ascii_case("none") {
        None
    } else {
        Some(args.fallback.parse::<EstimatorSpec>().map_err(|e| Failure::Usage(e.to_string()))?)
    };
    let scaling = match args.scaling {
        ScalingArg::Ar => Scaling::AndersonRubin,
        ScalingArg::Plain => Scaling::Plain,
    };
    let pulse_cfg = PulseConfig { test: TestConfig::new(args.pmin, scaling), precision: args.precision, fallback, fast_init: false };
    let prepared = prepare(&args.schema)?;
    let view = DesignView::new(&prepared.data, &prepared.partition)?;
    let mut rows = Vec::new();
    for c in &choices {
        rows.push(match c {
            Choice::Standard(spec) => report::Row::standard(&view, spec, &pulse_cfg.test)?,
            Choice::Pulse => report::Row::pulse(&view, &pulse_cfg)?,
        });
    }
    let weak = weak_instrument_stat(&view).ok();
    print!("{}", report::estimate_text(&view, &rows, weak.as_ref()));
    if let Some(path) = &args.json {
        let doc = report::estimate_json(&args.schema.data, prepared.preprocessing, &view, &rows, weak.as_ref());
        write_file(path, serde_json::to_string_pretty(&doc).expect("serialisable").as_bytes())?;
    }
    Ok(())
}

fn cmd_diagnose(args: &SchemaArgs) -> CliResult<()> {
    let prepared = prepare(args)?;
    let view = DesignView::new(&prepared.data, &prepared.partition)?;
    let weak = weak_instrument_stat(&view)?;
    print!("{}", report::diagnose_text(&view, &weak));
    Ok(())
}

/// CSV with anchors, endogenous regressors and target, shortest round-trip floats.
fn dataset_csv(ds: &Dataset) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = ds.a_names.iter().map(String::as_str).collect();
    header.extend(ds.x_names.iter().map(String::as_str));
    header.push(&ds.y_name);
    w.write_record(&header).map_err(pulse_core::Error::from)?;
    for i in 0..ds.n() {
        let mut rec: Vec<String> = ds.a.row(i).iter().map(|v| v.to_string()).collect();
        rec.extend(ds.x.row(i).iter().map(|v| v.to_string()));
        rec.push(ds.y[i].to_string());
        w.write_record(&rec).map_err(pulse_core::Error::from)?;
    }
    w.into_inner().map_err(|e| Failure::Core(pulse_core::Error::Io(e.into_error())))
}

fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "sample".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let spec: SemSpec = read_json(&args.sem)?;
    let model = SemModel::from_spec(&spec)?;
    let iv: Intervention = match &args.intervene {
        Some(p) => read_json(p)?,
        None => Intervention::None,
    };
    let ds = sem::sample(&model, args.n, args.seed, &iv)?;
    write_file(&args.out, &dataset_csv(&ds)?)?;
    let manifest = json!({
        "sem": args.sem.display().to_string(),
        "n": args.n,
        "seed": args.seed,
        "intervention": iv,
        "columns": ds.a_names.iter().chain(ds.x_names.iter()).chain(std::iter::once(&ds.y_name)).collect::<Vec<_>>(),
        "version": pulse_core::VERSION,
    });
    write_file(&manifest_path(&args.out), serde_json::to_string_pretty(&manifest).expect("serialisable").as_bytes())?;
    println!("wrote {} rows to {}", args.n, args.out.display());
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs) -> CliResult<()> {
    let mut cfg: ExperimentConfig = match (&args.config, &args.design) {
        (Some(path), _) => read_json(path)?,
        (None, Some(name)) => ExperimentConfig::new(Design::preset(name)?, 1000, 0),
        (None, None) => return Err(Failure::Usage("one of --config or --design is required".into())),
    };
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    let result = experiments::run_experiment(&cfg)?;
    fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    let name = cfg.design.name();
    let mut outputs = Vec::new();
    let results_path = args.out.join(format!("{name}.csv"));
    let mut buf = Vec::new();
    experiments::write_results_csv(&result, &mut buf)?;
    write_file(&results_path, &buf)?;
    outputs.push(results_path.file_name().unwrap().to_string_lossy().into_owned());
    if let Some(rob) = &result.robustness {
        let curves_path = args.out.join(format!("{name}_curves.csv"));
        let mut buf = Vec::new();
        experiments::write_curves_csv(rob, &mut buf)?;
        write_file(&curves_path, &buf)?;
        outputs.push(curves_path.file_name().unwrap().to_string_lossy().into_owned());
    }
    let mut columns = vec!["cell".to_string()];
    columns.extend(result.parameter_names.iter().cloned());
    columns.extend(experiments::RESULT_COLUMNS.iter().map(|s| s.to_string()));
    let manifest = json!({
        "config": cfg,
        "master_seed": cfg.master_seed,
        "version": pulse_core::VERSION,
        "design": name,
        "cells": result.cells.len(),
        "columns": columns,
        "outputs": outputs,
        "robustness": result.robustness,
    });
    write_file(&args.out.join(format!("{name}.manifest.json")), serde_json::to_string_pretty(&manifest).expect("serialisable").as_bytes())?;
    print!("{}", report::experiment_text(&result));
    println!("wrote {} to {}", outputs.join(", "), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Diagnose(a) => cmd_diagnose(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
