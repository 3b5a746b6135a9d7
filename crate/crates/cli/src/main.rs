//! `cellplan` command-line pipeline.

mod commands;
mod config;
mod ctx;
mod tables;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, RunConfig};
use crate::ctx::{Ctx, LogRecord, Status};

#[derive(Parser, Debug)]
#[command(
    name = "cellplan",
    version,
    about = "Base-station load profiling, classification, forecasting and planning"
)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthetic CDRs, labels and a femtocell database.
    Gen(GenArgs),
    /// CDRs to per-day load series and profiles.
    Ingest(IngestArgs),
    TrainSvm(TrainSvmArgs),
    Classify(ClassifyArgs),
    TrainKmeans(TrainKmeansArgs),
    AssignKmeans(ClassifyArgs),
    /// Grid search with cross-validation.
    Tune(TuneArgs),
    /// One regressor per site.
    TrainSvr(TrainSvrArgs),
    Predict(PredictArgs),
    Plan(PlanArgs),
    /// Accuracy of classes against labels, or a plan against actual load.
    Evaluate(EvaluateArgs),
    /// γ-vs-metric table from a tune score table.
    ExportCurve(ExportCurveArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Ingest(_) => "ingest",
            Command::TrainSvm(_) => "train-svm",
            Command::Classify(_) => "classify",
            Command::TrainKmeans(_) => "train-kmeans",
            Command::AssignKmeans(_) => "assign-kmeans",
            Command::Tune(_) => "tune",
            Command::TrainSvr(_) => "train-svr",
            Command::Predict(_) => "predict",
            Command::Plan(_) => "plan",
            Command::Evaluate(_) => "evaluate",
            Command::ExportCurve(_) => "export-curve",
        }
    }
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub stations: Option<usize>,
    #[arg(long)]
    pub days: Option<usize>,
    /// First day, YYYY-MM-DD.
    #[arg(long)]
    pub start: Option<chrono::NaiveDate>,
    /// Distinct users available per station.
    #[arg(long)]
    pub users: Option<usize>,
    /// Noise level applied to all three templates.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Weekdays class 2, Sunday class 1, for `--weeks` weeks.
    #[arg(long)]
    pub weekly: bool,
    #[arg(long)]
    pub weeks: Option<usize>,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub cdr: PathBuf,
    #[arg(long)]
    pub granularity: Option<cellplan::Granularity>,
}

#[derive(Args, Debug)]
pub struct TrainSvmArgs {
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long = "c")]
    pub c: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, conflicts_with = "series", required_unless_present = "series")]
    pub profiles: Option<PathBuf>,
    /// Raw load series, profiled at the model's granularity.
    #[arg(long)]
    pub series: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainKmeansArgs {
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub granularity: Option<cellplan::Granularity>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum Task {
    Svm,
    Svr,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[arg(long, value_enum)]
    pub task: Task,
    /// TOML grid specification; defaults depend on the task.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, required_if_eq("task", "svm"))]
    pub profiles: Option<PathBuf>,
    #[arg(long, required_if_eq("task", "svm"))]
    pub labels: Option<PathBuf>,
    #[arg(long, required_if_eq("task", "svr"))]
    pub series: Option<PathBuf>,
    /// Site whose history is tuned on; the first site when omitted.
    #[arg(long)]
    pub site: Option<String>,
    /// Only use days strictly before this date.
    #[arg(long)]
    pub before: Option<chrono::NaiveDate>,
}

#[derive(Args, Debug)]
pub struct TrainSvrArgs {
    #[arg(long)]
    pub series: PathBuf,
    /// Restrict to these sites; all sites when omitted.
    #[arg(long)]
    pub site: Vec<String>,
    /// Only train on days strictly before this date.
    #[arg(long)]
    pub before: Option<chrono::NaiveDate>,
    #[arg(long = "c")]
    pub c: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Regressor files written by `train-svr`; the site is taken from the
    /// `svr_<site>.json` file name.
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub date: chrono::NaiveDate,
    #[arg(long, default_value_t = 1)]
    pub days: usize,
    /// Series file supplying the actual column.
    #[arg(long)]
    pub actual: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub femto: PathBuf,
    #[arg(long)]
    pub classes: Option<PathBuf>,
    /// Day to plan; required when the forecasts span several days.
    #[arg(long)]
    pub date: Option<chrono::NaiveDate>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long, requires = "labels", conflicts_with = "plan")]
    pub classes: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, requires_all = ["actual", "femto"], required_unless_present = "classes")]
    pub plan: Option<PathBuf>,
    /// Series file with the realized load.
    #[arg(long)]
    pub actual: Option<PathBuf>,
    #[arg(long)]
    pub femto: Option<PathBuf>,
    #[arg(long)]
    pub date: Option<chrono::NaiveDate>,
}

#[derive(Args, Debug)]
pub struct ExportCurveArgs {
    #[arg(long)]
    pub table: PathBuf,
}

fn error_kind(err: &anyhow::Error) -> String {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<cellplan::Error>() {
            return e.kind().to_owned();
        }
        if cause.is::<ConfigError>() {
            return "config".to_owned();
        }
        if cause.is::<std::io::Error>() {
            return "io".to_owned();
        }
    }
    "runtime".to_owned()
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn report(kind: &str, message: &str) {
    let v = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{v}");
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let head: Vec<&str> = text.lines().take_while(|l| !l.trim().is_empty()).collect();
            report(
                "usage",
                &one_line(head.join(" ").trim_start_matches("error: ")),
            );
            return ExitCode::from(2);
        }
    };
    let name = cli.command.name();

    let mut cfg = match RunConfig::load(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            let (kind, message) = (error_kind(&e), one_line(&format!("{e:#}")));
            report(&kind, &message);
            let empty = BTreeMap::new();
            let _ = ctx::append_log(
                &cli.out,
                &LogRecord {
                    timestamp: chrono::Utc::now().to_rfc3339(),
                    subcommand: name,
                    argv: &argv,
                    config: None,
                    seed: cli.seed,
                    inputs: &empty,
                    outputs: &empty,
                    status: Status::Error { kind, message },
                },
            );
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let seed = cfg.seed;
    let mut ctx = Ctx::new(cfg, seed, cli.out.clone());

    let result = commands::run(&mut ctx, &cli.command);
    let (code, status) = match &result {
        Ok(()) => (ExitCode::SUCCESS, Status::Ok),
        Err(e) => {
            let (kind, message) = (error_kind(e), one_line(&format!("{e:#}")));
            report(&kind, &message);
            let code = if kind == "config" { 2 } else { 1 };
            (ExitCode::from(code), Status::Error { kind, message })
        }
    };
    if let Err(e) = ctx.append_log(name, &argv, status) {
        report("io", &one_line(&format!("run log: {e:#}")));
        return ExitCode::from(1);
    }
    code
}
