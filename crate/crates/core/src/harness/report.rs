use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::metrics::Metrics;
use super::runner::RunReport;
use super::sweep::SweepResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Pretty JSON with object keys sorted, so identical values give identical
/// bytes.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's Value keeps object keys in a BTreeMap.
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// One row per sweep point: `param, joint_acc, sensing_acc, seed`.
pub fn sweep_csv(sweep: &SweepResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["param", "joint_acc", "sensing_acc", "seed"])?;
    for p in &sweep.points {
        w.write_record([
            p.value.to_string(),
            p.joint.accuracy.to_string(),
            p.sensing_only.accuracy.to_string(),
            p.seed.to_string(),
        ])?;
    }
    into_string(w)
}

/// Per-epoch training history: `epoch, train_loss, test_accuracy`.
pub fn history_csv(report: &RunReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "train_loss", "test_accuracy"])?;
    for e in &report.history.epochs {
        w.write_record([
            e.epoch.to_string(),
            e.train_loss.to_string(),
            e.test_accuracy.to_string(),
        ])?;
    }
    into_string(w)
}

/// The confusion matrix as a 2x2 block with row and column labels.
pub fn confusion_csv(metrics: &Metrics) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["true", "pred_animal", "pred_vehicle"])?;
    for (name, row) in ["animal", "vehicle"].iter().zip(&metrics.confusion) {
        w.write_record([name.to_string(), row[0].to_string(), row[1].to_string()])?;
    }
    into_string(w)
}

/// Where the CSV form of a run report puts its confusion matrix:
/// `metrics.csv` goes with `metrics-confusion.csv`.
pub fn confusion_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}-confusion.csv"))
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes a run report. JSON holds everything; CSV writes the per-epoch
/// history to `path` and the confusion matrix beside it.
pub fn emit_run_report(report: &RunReport, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    match format {
        Format::Json => fs::write(path, to_sorted_json(report)?)?,
        Format::Csv => {
            fs::write(path, history_csv(report)?)?;
            fs::write(confusion_path(path), confusion_csv(&report.metrics)?)?;
        }
    }
    Ok(())
}

pub fn emit_sweep_report(sweep: &SweepResult, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let text = match format {
        Format::Json => to_sorted_json(sweep)?,
        Format::Csv => sweep_csv(sweep)?,
    };
    fs::write(path, text)?;
    Ok(())
}

pub fn read_run_report(path: impl AsRef<Path>) -> Result<RunReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
