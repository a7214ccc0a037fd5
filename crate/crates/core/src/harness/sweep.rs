//! One-at-a-time parameter sweeps. Every point retrains a joint model and a
//! sensing-only model from scratch with the same seeds and scores both on the
//! same test split with the same eval seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{compression_rate_percent, ExperimentConfig};
use super::metrics::Metrics;
use super::runner::{run_experiment, EVAL_POLICY};
use crate::channel::ChannelKind;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::Mode;

/// Sensing SNR sits this far below the communication SNR in the
/// communication-SNR sweep.
pub const COMM_SWEEP_SENSING_GAP_DB: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    CommSnr,
    SensingSnr,
    OutputSize,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::CommSnr => "comm-snr",
            SweepKind::SensingSnr => "sensing-snr",
            SweepKind::OutputSize => "output-size",
        }
    }

    /// Desk-scale grid, four points spanning the range of interest.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepKind::CommSnr => vec![0.0, 3.0, 6.0, 10.0],
            SweepKind::SensingSnr => vec![-9.0, -6.0, -3.0, 0.0],
            SweepKind::OutputSize => vec![4.0, 8.0, 12.0, 20.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub seed: u64,
    pub compression_rate: f64,
    pub joint: Metrics,
    pub sensing_only: Metrics,
}

impl SweepPoint {
    pub fn joint_accuracy(&self) -> f64 {
        self.joint.accuracy
    }

    pub fn sensing_accuracy(&self) -> f64 {
        self.sensing_only.accuracy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub channel: ChannelKind,
    pub base: ExperimentConfig,
    pub points: Vec<SweepPoint>,
    pub eval_policy: String,
}

impl SweepResult {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn joint_curve(&self) -> Vec<f64> {
        self.points.iter().map(SweepPoint::joint_accuracy).collect()
    }

    pub fn sensing_curve(&self) -> Vec<f64> {
        self.points.iter().map(SweepPoint::sensing_accuracy).collect()
    }
}

/// The experiment run at one sweep point.
pub fn point_config(
    kind: SweepKind,
    base: &ExperimentConfig,
    value: f64,
    mode: Mode,
) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    cfg.mode = mode;
    match kind {
        SweepKind::CommSnr => {
            cfg.comm_snr_db = value;
            cfg.vehicle_sensing_snr_db = value - COMM_SWEEP_SENSING_GAP_DB;
        }
        SweepKind::SensingSnr => cfg.vehicle_sensing_snr_db = value,
        SweepKind::OutputSize => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::Config(format!(
                    "output size {value} is not a positive integer"
                )));
            }
            cfg.output_size = value as usize;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs every point in both modes, up to `jobs` trainings at a time.
pub fn run_sweep(
    dataset: &Dataset,
    kind: SweepKind,
    points: &[f64],
    base: &ExperimentConfig,
    jobs: usize,
) -> Result<SweepResult> {
    let tasks: Vec<(usize, ExperimentConfig)> = points
        .iter()
        .enumerate()
        .flat_map(|(i, &v)| {
            [Mode::Joint, Mode::SensingOnly]
                .into_iter()
                .map(move |m| point_config(kind, base, v, m).map(|c| (i, c)))
        })
        .collect::<Result<_>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Metrics> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(i, cfg)| {
                log::info!(
                    "{} point {} ({}) {}: training",
                    kind.name(),
                    i,
                    points[*i],
                    cfg.mode
                );
                let out = run_experiment(dataset, cfg)?;
                log::info!(
                    "{} point {} ({}) {}: accuracy {:.4}",
                    kind.name(),
                    i,
                    points[*i],
                    cfg.mode,
                    out.metrics.accuracy
                );
                Ok(out.metrics)
            })
            .collect::<Result<_>>()
    })?;

    let points = points
        .iter()
        .zip(outcomes.chunks(2))
        .zip(tasks.chunks(2))
        .map(|((&value, m), t)| SweepPoint {
            value,
            seed: base.seed,
            compression_rate: compression_rate_percent(t[0].1.output_size),
            joint: m[0].clone(),
            sensing_only: m[1].clone(),
        })
        .collect();
    Ok(SweepResult {
        kind,
        channel: base.channel,
        base: base.clone(),
        points,
        eval_policy: EVAL_POLICY.to_string(),
    })
}

/// Communication SNR sweep; the vehicle sensing SNR follows 6 dB below it.
pub fn sweep_comm_snr(
    dataset: &Dataset,
    points: &[f64],
    cfg: &ExperimentConfig,
    jobs: usize,
) -> Result<SweepResult> {
    run_sweep(dataset, SweepKind::CommSnr, points, cfg, jobs)
}

/// Vehicle sensing SNR sweep at the configured communication SNR.
pub fn sweep_sensing_snr(
    dataset: &Dataset,
    points: &[f64],
    cfg: &ExperimentConfig,
    jobs: usize,
) -> Result<SweepResult> {
    run_sweep(dataset, SweepKind::SensingSnr, points, cfg, jobs)
}

/// Encoder output size sweep with `n_c1 = n_c2`.
pub fn sweep_output_size(
    dataset: &Dataset,
    sizes: &[usize],
    cfg: &ExperimentConfig,
    jobs: usize,
) -> Result<SweepResult> {
    let points: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    run_sweep(dataset, SweepKind::OutputSize, &points, cfg, jobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comm_sweep_moves_sensing_with_it() {
        let c = point_config(
            SweepKind::CommSnr,
            &ExperimentConfig::default(),
            10.0,
            Mode::Joint,
        )
        .unwrap();
        assert_eq!(c.comm_snr_db, 10.0);
        assert_eq!(c.vehicle_sensing_snr_db, 4.0);
        assert_eq!(c.animal_offset_db, 6.0);
    }

    #[test]
    fn sensing_sweep_pins_comm() {
        let c = point_config(
            SweepKind::SensingSnr,
            &ExperimentConfig::default(),
            -9.0,
            Mode::SensingOnly,
        )
        .unwrap();
        assert_eq!(c.comm_snr_db, 3.0);
        assert_eq!(c.vehicle_sensing_snr_db, -9.0);
        assert_eq!(c.mode, Mode::SensingOnly);
    }

    #[test]
    fn output_size_must_be_integral() {
        let base = ExperimentConfig::default();
        assert_eq!(
            point_config(SweepKind::OutputSize, &base, 8.0, Mode::Joint)
                .unwrap()
                .output_size,
            8
        );
        assert!(point_config(SweepKind::OutputSize, &base, 7.5, Mode::Joint).is_err());
        assert!(point_config(SweepKind::OutputSize, &base, 0.0, Mode::Joint).is_err());
    }
}
