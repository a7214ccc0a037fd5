use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use super::checks::gradcheck_suite;
use super::config::{parse_config_text, ExperimentConfig, NON_EXPERIMENT_KEYS};
use super::metrics::evaluate;
use super::report::{emit_run_report, emit_sweep_report, to_sorted_json, Format};
use super::runner::run_experiment_with;
use super::sweep::{run_sweep, SweepKind, SweepResult};
use crate::channel::ChannelKind;
use crate::dataset::{load_cifar10, synthetic, Dataset};
use crate::error::Error;
use crate::models::checkpoint;
use crate::models::{Mode, Precision};

#[derive(Debug, Parser)]
#[command(
    name = "sensecomm",
    version,
    about = "Joint sensing and task-oriented communications for transmitter identification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model and write a checkpoint plus a metrics report.
    Train(RunArgs),
    /// Score a checkpoint on the test split.
    Eval(EvalArgs),
    /// Accuracy against communication SNR (sensing SNR follows 6 dB lower).
    SweepCommSnr(SweepArgs),
    /// Accuracy against vehicle sensing SNR at fixed communication SNR.
    SweepSensingSnr(SweepArgs),
    /// Accuracy against encoder output size (n_c1 = n_c2).
    SweepOutputSize(SweepArgs),
    /// Finite-difference checks of every layer and the whole pipeline.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Config file: JSON object or `key = value` lines, same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding the CIFAR-10 binary batch files.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Use a generated stand-in dataset with this many training samples
    /// (and a fifth as many test samples) instead of CIFAR-10.
    #[arg(long, conflicts_with = "data_dir")]
    pub synthetic: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(ChannelKind))]
    pub channel: Option<ChannelKind>,
    #[arg(long, allow_negative_numbers = true)]
    pub comm_snr_db: Option<f64>,
    /// Vehicle sensing SNR; animals are `--offset-db` lower.
    #[arg(long, allow_negative_numbers = true)]
    pub sensing_snr_db: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub offset_db: Option<f64>,
    /// Output size of both encoders.
    #[arg(long)]
    pub output_size: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(Mode))]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eval_seed: Option<u64>,
    #[arg(long, value_parser = parse_precision)]
    pub precision: Option<Precision>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Comma-separated grid; defaults to four points spanning the range.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub points: Option<Vec<f64>>,
    /// Trainings to run concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    match s {
        "f32" => Ok(Precision::F32),
        "f64" => Ok(Precision::F64),
        other => Err(format!("unknown precision {other:?} (expected f32 or f64)")),
    }
}

/// Failure of a subcommand, with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl ExperimentArgs {
    fn config_file(&self) -> Result<Map<String, Value>, CliError> {
        let Some(path) = &self.config else {
            return Ok(Map::new());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Ok(parse_config_text(&text)?)
    }

    /// `--data-dir`, falling back to `data_dir` in the config file.
    fn data_dir(&self) -> Result<Option<PathBuf>, CliError> {
        if self.data_dir.is_some() {
            return Ok(self.data_dir.clone());
        }
        let map = self.config_file()?;
        let entry = map.iter().find(|(k, _)| k.replace('-', "_") == "data_dir");
        Ok(entry.and_then(|(_, v)| v.as_str()).map(PathBuf::from))
    }

    /// Defaults, then the config file, then explicit flags.
    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::default();
        let mut map = self.config_file()?;
        map.retain(|k, _| !NON_EXPERIMENT_KEYS.contains(&k.replace('-', "_").as_str()));
        cfg.apply_overrides(&map)?;
        let mut flags = Map::new();
        let mut set = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                flags.insert(k.to_string(), v);
            }
        };
        set("channel", self.channel.map(|c| Value::from(c.to_string())));
        set("comm_snr_db", self.comm_snr_db.map(Value::from));
        set("vehicle_sensing_snr_db", self.sensing_snr_db.map(Value::from));
        set("animal_offset_db", self.offset_db.map(Value::from));
        set("output_size", self.output_size.map(Value::from));
        set("mode", self.mode.map(|m| Value::from(m.to_string())));
        set("epochs", self.epochs.map(Value::from));
        set("batch_size", self.batch_size.map(Value::from));
        set("seed", self.seed.map(Value::from));
        set("eval_seed", self.eval_seed.map(Value::from));
        set(
            "precision",
            self.precision
                .map(|p| Value::from(if p == Precision::F32 { "f32" } else { "f64" })),
        );
        cfg.apply_overrides(&flags)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The dataset and a short name for reports.
    pub fn dataset(&self, seed: u64) -> Result<(Dataset, String), CliError> {
        if let Some(n) = self.synthetic {
            return Ok((synthetic(n, (n / 5).max(1), seed), format!("synthetic-{n}")));
        }
        let dir = self.data_dir()?;
        let dir = dir.as_ref().ok_or_else(|| {
            CliError::Usage("--data-dir is required (or --synthetic N for a stand-in dataset)".into())
        })?;
        if !dir.is_dir() {
            return Err(CliError::Usage(format!(
                "data dir {} does not exist",
                dir.display()
            )));
        }
        Ok((load_cifar10(dir)?, "cifar10".to_string()))
    }
}

fn out_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Run(Error::Io(e)))
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Json => "json",
        Format::Csv => "csv",
    }
}

fn cmd_train(args: &RunArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = args.exp.experiment()?;
    let (data, name) = args.exp.dataset(cfg.seed)?;
    let outcome = run_experiment_with(&data, &cfg, |e| {
        eprintln!(
            "epoch {}: train loss {:.4}, test accuracy {:.4}",
            e.epoch, e.train_loss, e.test_accuracy
        )
    })?;
    out_dir(&args.exp.out)?;
    checkpoint::save(&outcome.params, cfg.seed, args.exp.out.join("model.ckpt"))?;
    let report_path = args.exp.out.join(format!("metrics.{}", ext(args.exp.format)));
    emit_run_report(&outcome.report(&name), &report_path, args.exp.format)?;
    let m = &outcome.metrics;
    println!(
        "accuracy {:.4}  compression {}  misdetection {:.4}  false alarm {:.4}  runtime {:.1}s",
        m.accuracy,
        m.compression_label(),
        m.misdetection_rate,
        m.false_alarm_rate,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let (params, header) = checkpoint::load::<f32>(&args.checkpoint)?;
    let mut cfg = args.exp.experiment()?;
    cfg.output_size = params.config.n_c1;
    cfg.mode = params.config.mode;
    let (data, _) = args.exp.dataset(header.seed)?;
    let metrics = evaluate(&params, &data.test, &cfg.train_config().link(), cfg.eval_seed)?;
    out_dir(&args.exp.out)?;
    std::fs::write(args.exp.out.join("eval.json"), to_sorted_json(&metrics)?)
        .map_err(|e| CliError::Run(Error::Io(e)))?;
    println!(
        "accuracy {:.4}  compression {}  runtime {:.1}s",
        metrics.accuracy,
        metrics.compression_label(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_sweep(kind: SweepKind, args: &SweepArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = args.exp.experiment()?;
    let (data, _) = args.exp.dataset(cfg.seed)?;
    let points = args.points.clone().unwrap_or_else(|| kind.default_grid());
    if points.is_empty() {
        return Err(CliError::Usage("--points must not be empty".into()));
    }
    let sweep: SweepResult = run_sweep(&data, kind, &points, &cfg, args.jobs)?;
    out_dir(&args.exp.out)?;
    let path = args.exp.out.join(format!(
        "sweep-{}-{}.{}",
        kind.name(),
        cfg.channel,
        ext(args.exp.format)
    ));
    emit_sweep_report(&sweep, &path, args.exp.format)?;
    println!(
        "{:>10}  {:>9}  {:>12}  {:>11}",
        kind.name(),
        "joint",
        "sensing-only",
        "compression"
    );
    for p in &sweep.points {
        println!(
            "{:>10}  {:>9.4}  {:>12.4}  {:>10.2}%",
            p.value, p.joint.accuracy, p.sensing_only.accuracy, p.compression_rate
        );
    }
    println!(
        "accuracy {:.4} at {} = {}  compression {:.2}%  runtime {:.1}s",
        sweep.points[0].joint.accuracy,
        kind.name(),
        sweep.points[0].value,
        sweep.points[0].compression_rate,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<bool, CliError> {
    let started = Instant::now();
    let reports = gradcheck_suite(args.seed)?;
    let mut ok = true;
    for r in &reports {
        println!(
            "{}  {:<52} max rel. error {:.3e} over {} coordinates",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.max_rel_error,
            r.checked
        );
        ok &= r.passed;
    }
    println!(
        "{} of {} checks passed  runtime {:.1}s",
        reports.iter().filter(|r| r.passed).count(),
        reports.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(ok)
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code: 0 on success, 2 on usage errors, 1 otherwise.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a).map(|_| true),
        Command::Eval(a) => cmd_eval(a).map(|_| true),
        Command::SweepCommSnr(a) => cmd_sweep(SweepKind::CommSnr, a).map(|_| true),
        Command::SweepSensingSnr(a) => cmd_sweep(SweepKind::SensingSnr, a).map(|_| true),
        Command::SweepOutputSize(a) => cmd_sweep(SweepKind::OutputSize, a).map(|_| true),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}
