use serde::{Deserialize, Serialize};

use super::arch::{ModelConfig, ModelParams};
use super::pipeline::{backward, forward, loss_and_grad, predict_all, LinkConfig, ModelGrads, Prediction};
use crate::channel::{ChannelConfig, ChannelKind, SensingConfig};
use crate::dataset::{batch_indices, Dataset, ImageSample};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig, AdamState, Real, Rng, Tensor};

/// Stream ids derived from the training seed.
const SHUFFLE_STREAM: u64 = 1;
const CHANNEL_STREAM: u64 = 2;
const DROPOUT_STREAM: u64 = 3;
/// Stream id for evaluation channels, keyed by the eval seed.
pub const EVAL_STREAM: u64 = 0xE7A1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub channel: ChannelConfig,
    pub sensing: SensingConfig,
    pub seed: u64,
    /// Seeds the channel draws used for test-set evaluation.
    pub eval_seed: u64,
    pub precision: Precision,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            batch_size: 64,
            channel: ChannelConfig {
                kind: ChannelKind::Awgn,
                snr_db: 3.0,
            },
            sensing: SensingConfig::default(),
            seed: 0,
            eval_seed: 0,
            precision: Precision::F32,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        Ok(())
    }

    pub fn link(&self) -> LinkConfig {
        LinkConfig {
            channel: self.channel,
            sensing: self.sensing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    /// Mean loss of the very first batch, before any update.
    pub first_batch_loss: f64,
    pub steps: u64,
    pub epochs: Vec<EpochRecord>,
}

/// Fraction of predictions that match the true labels.
pub fn accuracy(samples: &[ImageSample], preds: &[Prediction]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples
        .iter()
        .zip(preds)
        .filter(|(s, p)| s.label2() == p.label_hat)
        .count();
    hits as f64 / samples.len() as f64
}

/// Evaluation rng for a given eval seed. Every evaluation starts from the
/// same state, so all models see the same test-time channel draws.
pub fn eval_rng(eval_seed: u64) -> Rng {
    Rng::with_stream(eval_seed, EVAL_STREAM)
}

/// One optimizer step on `batch`. Returns the mean loss.
pub fn train_step<T: Real>(
    params: &mut ModelParams<T>,
    grads: &mut ModelGrads<T>,
    adam: &mut AdamState<T>,
    batch: &[&ImageSample],
    cfg: &TrainConfig,
    channel_rng: &mut Rng,
    dropout_rng: &mut Rng,
) -> Result<f64> {
    let link = cfg.link();
    grads.fill_zero();
    let scale = T::cast(1.0 / batch.len() as f64);
    let mut total = 0.0;
    for sample in batch {
        let pass = forward(
            params,
            sample.pixels(),
            sample.label2(),
            &link,
            channel_rng,
            true,
            Some(dropout_rng),
        )?;
        let (loss, mut g) = loss_and_grad(&pass, sample.label2())?;
        g.data_mut().iter_mut().for_each(|v| *v *= scale);
        backward(params, &pass, g, grads)?;
        total += loss;
    }
    let mean = total / batch.len() as f64;
    if !mean.is_finite() {
        return Err(Error::Divergence(format!(
            "non-finite batch loss at step {}",
            adam.step_count + 1
        )));
    }
    let grad_refs: Vec<&Tensor<T>> = grads.tensors().collect();
    let mut param_refs: Vec<&mut Tensor<T>> = params.tensors_mut().collect();
    adam_step(&mut param_refs, &grad_refs, adam, &cfg.adam)?;
    Ok(mean)
}

/// Trains all three networks jointly. After each epoch the model is scored
/// on the test split and `on_epoch` is called.
pub fn train_with<T: Real>(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelParams<T>, History)> {
    model_cfg.validate()?;
    cfg.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let mut params = ModelParams::<T>::seeded(*model_cfg, cfg.seed)?;
    let mut grads = ModelGrads::zeros(&params);
    let mut adam = AdamState::new(params.tensors());
    let mut shuffle_rng = Rng::with_stream(cfg.seed, SHUFFLE_STREAM);
    let mut channel_rng = Rng::with_stream(cfg.seed, CHANNEL_STREAM);
    let mut dropout_rng = Rng::with_stream(cfg.seed, DROPOUT_STREAM);
    let link = cfg.link();

    let mut history = History::default();
    for epoch in 1..=cfg.epochs {
        let batches = batch_indices(dataset.train.len(), cfg.batch_size, Some(&mut shuffle_rng))?;
        let mut loss_sum = 0.0;
        for (b, idx) in batches.iter().enumerate() {
            let batch: Vec<&ImageSample> = idx.iter().map(|&i| &dataset.train[i]).collect();
            let loss = train_step(
                &mut params,
                &mut grads,
                &mut adam,
                &batch,
                cfg,
                &mut channel_rng,
                &mut dropout_rng,
            )
            .map_err(|e| match e {
                Error::Divergence(msg) => Error::Divergence(format!("epoch {epoch}, batch {b}: {msg}")),
                other => other,
            })?;
            if history.steps == 0 {
                history.first_batch_loss = loss;
            }
            history.steps += 1;
            loss_sum += loss * batch.len() as f64;
        }
        let preds = predict_all(&params, &dataset.test, &link, &mut eval_rng(cfg.eval_seed))?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / dataset.train.len() as f64,
            test_accuracy: accuracy(&dataset.test, &preds),
        };
        on_epoch(&record);
        history.epochs.push(record);
    }
    Ok((params, history))
}

pub fn train<T: Real>(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(ModelParams<T>, History)> {
    train_with(dataset, model_cfg, cfg, |_| {})
}
