//! Finite-difference check of the whole pipeline with the channel frozen.

use super::arch::{Mode, ModelConfig, ModelParams};
use super::pipeline::{backward, forward, loss_and_grad, LinkConfig, ModelGrads};
use crate::channel::{ChannelRealization, Replay};
use crate::dataset::{synthetic, ImageSample};
use crate::error::Result;
use crate::nn::gradcheck::{grad_check, sample_indices, GradCheckReport};
use crate::nn::Rng;

/// Coordinates perturbed per parameter tensor; smaller tensors are checked
/// in full.
pub const COORDS_PER_TENSOR: usize = 200;

fn batch_loss(
    params: &ModelParams<f64>,
    samples: &[ImageSample],
    realizations: &[Vec<ChannelRealization>],
    link: &LinkConfig,
) -> Result<(f64, ModelGrads<f64>)> {
    let mut grads = ModelGrads::zeros(params);
    let mut total = 0.0;
    let scale = 1.0 / samples.len() as f64;
    for (s, r) in samples.iter().zip(realizations) {
        let mut replay = Replay::new(r.clone());
        let pass = forward(params, s.pixels(), s.label2(), link, &mut replay, false, None)?;
        let (loss, mut g) = loss_and_grad(&pass, s.label2())?;
        g.data_mut().iter_mut().for_each(|v| *v *= scale);
        backward(params, &pass, g, &mut grads)?;
        total += loss;
    }
    Ok((total * scale, grads))
}

/// Checks the end-to-end gradient of the mean cross-entropy over `batch`
/// samples, with dropout off and one frozen realization set per sample.
pub fn check_pipeline(
    mode: Mode,
    n_c: usize,
    batch: usize,
    link: &LinkConfig,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let cfg = ModelConfig {
        n_c1: n_c,
        n_c2: n_c,
        mode,
    };
    let params = ModelParams::<f64>::seeded(cfg, seed)?;
    let samples = synthetic(batch, 0, seed ^ 0x5EED).train;
    let mut rng = Rng::with_stream(seed, 9);
    let realizations: Vec<Vec<ChannelRealization>> = samples
        .iter()
        .map(|s| {
            forward(&params, s.pixels(), s.label2(), link, &mut rng, false, None)
                .map(|p| p.realizations.into_vec())
        })
        .collect::<Result<_>>()?;

    let (_, grads) = batch_loss(&params, &samples, &realizations, link)?;
    let analytic = grads.to_flat();
    let flat = params.to_flat();

    let mut pick = Rng::with_stream(seed, 10);
    let mut indices = Vec::new();
    let mut offset = 0;
    for t in params.tensors() {
        indices.extend(
            sample_indices(t.len(), COORDS_PER_TENSOR, &mut pick)
                .into_iter()
                .map(|i| i + offset),
        );
        offset += t.len();
    }

    let mut probe = params.clone();
    let name = format!("pipeline ({mode}, n_c={n_c}, batch={batch})");
    Ok(grad_check(
        &name,
        |v| {
            probe.set_flat(v).expect("same length");
            batch_loss(&probe, &samples, &realizations, link)
                .expect("frozen forward")
                .0
        },
        &flat,
        &analytic,
        Some(&indices),
        tolerance,
    ))
}
