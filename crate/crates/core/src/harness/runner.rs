use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{evaluate, Metrics};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::models::{train_with, EpochRecord, History, ModelParams, Precision};
use crate::nn::Real;

/// Evaluation protocol recorded in every report.
pub const EVAL_POLICY: &str =
    "one channel realization per test sample, drawn in test-set order from the eval seed";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: ExperimentConfig,
    pub metrics: Metrics,
    pub history: History,
    /// Trained weights, stored in single precision whatever the training
    /// precision was.
    pub params: ModelParams<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub seed: u64,
    pub eval_seed: u64,
}

/// Serialized form of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub config: ExperimentConfig,
    pub metrics: Metrics,
    pub history: History,
    pub seeds: Seeds,
    pub eval_policy: String,
}

impl RunOutcome {
    pub fn report(&self, dataset: &str) -> RunReport {
        RunReport {
            dataset: dataset.to_string(),
            config: self.config.clone(),
            metrics: self.metrics.clone(),
            history: self.history.clone(),
            seeds: Seeds {
                seed: self.config.seed,
                eval_seed: self.config.eval_seed,
            },
            eval_policy: EVAL_POLICY.to_string(),
        }
    }
}

fn run_typed<T: Real>(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<RunOutcome> {
    let train_cfg = cfg.train_config();
    let (params, history) = train_with::<T>(dataset, &cfg.model_config(), &train_cfg, on_epoch)?;
    let metrics = evaluate(&params, &dataset.test, &train_cfg.link(), cfg.eval_seed)?;
    Ok(RunOutcome {
        config: cfg.clone(),
        metrics,
        history,
        params: params.cast(),
    })
}

/// Trains one model from scratch and scores it on the test split.
pub fn run_experiment_with(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<RunOutcome> {
    cfg.validate()?;
    match cfg.precision {
        Precision::F32 => run_typed::<f32>(dataset, cfg, on_epoch),
        Precision::F64 => run_typed::<f64>(dataset, cfg, on_epoch),
    }
}

pub fn run_experiment(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_experiment_with(dataset, cfg, |_| {})
}
