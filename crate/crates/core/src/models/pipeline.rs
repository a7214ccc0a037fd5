//! The two-round transmission and its backward pass.
//!
//! Round one: encoder 1 maps the image to `s1`, which is normalized and sent
//! to the receiver while its reflection returns to the transmitter. Round
//! two: encoder 2 maps the sensed return to `s2`, normalized and sent to the
//! receiver. In joint mode the decoder sees `[y_R1 || y_R2]`; in
//! sensing-only mode just `y_R2`.

use serde::{Deserialize, Serialize};

use super::arch::{Mode, ModelParams};
use crate::channel::{
    apply_realization, channel_backward, normalize_power, normalize_power_backward, ChannelConfig,
    ChannelKind, ChannelRealization, ChannelSource, SensingConfig,
};
use crate::dataset::{BinaryLabel, ImageSample};
use crate::error::{Error, Result};
use crate::nn::layers::softmax_apply;
use crate::nn::loss::{cross_entropy, cross_entropy_logit_grad, onehot};
use crate::nn::{Gradients, Real, Rng, Tensor, Trace};

/// Channel conditions shared by both rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub channel: ChannelConfig,
    pub sensing: SensingConfig,
}

impl LinkConfig {
    pub fn kind(&self) -> ChannelKind {
        self.channel.kind
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probs: [f64; 2],
    pub label_hat: BinaryLabel,
}

impl Prediction {
    fn from_probs<T: Real>(p: &Tensor<T>) -> Self {
        let probs = [p.data()[0].as_f64(), p.data()[1].as_f64()];
        let label_hat = if probs[1] > probs[0] {
            BinaryLabel::Vehicle
        } else {
            BinaryLabel::Animal
        };
        Prediction { probs, label_hat }
    }
}

/// The realizations drawn in one forward pass, in draw order.
#[derive(Debug, Clone, PartialEq)]
pub struct Realizations {
    /// Transmitter to receiver, round one. Absent in sensing-only mode.
    pub comm1: Option<ChannelRealization>,
    /// Transmitter to target and back.
    pub sensing: ChannelRealization,
    /// Transmitter to receiver, round two.
    pub comm2: ChannelRealization,
}

impl Realizations {
    pub fn into_vec(self) -> Vec<ChannelRealization> {
        self.comm1.into_iter().chain([self.sensing, self.comm2]).collect()
    }
}

/// Everything the backward pass needs from one sample's forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    e1_traces: Vec<Trace<T>>,
    e1_out: Tensor<T>,
    e1_norm: f64,
    e2_traces: Vec<Trace<T>>,
    e2_out: Tensor<T>,
    e2_norm: f64,
    d_traces: Vec<Trace<T>>,
    probs: Tensor<T>,
    pub realizations: Realizations,
}

impl<T: Real> ForwardPass<T> {
    pub fn prediction(&self) -> Prediction {
        Prediction::from_probs(&self.probs)
    }

    pub fn probs(&self) -> &Tensor<T> {
        &self.probs
    }
}

/// Parameter gradients of all three networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads<T> {
    pub encoder1: Gradients<T>,
    pub encoder2: Gradients<T>,
    pub decoder: Gradients<T>,
}

impl<T: Real> ModelGrads<T> {
    pub fn zeros(params: &ModelParams<T>) -> Self {
        ModelGrads {
            encoder1: params.encoder1.zero_grads(),
            encoder2: params.encoder2.zero_grads(),
            decoder: params.decoder.zero_grads(),
        }
    }

    pub fn fill_zero(&mut self) {
        self.encoder1.fill_zero();
        self.encoder2.fill_zero();
        self.decoder.fill_zero();
    }

    /// Same order as [`ModelParams::tensors`].
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.encoder1
            .tensors()
            .chain(self.encoder2.tensors())
            .chain(self.decoder.tensors())
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.encoder1
            .tensors_mut()
            .chain(self.encoder2.tensors_mut())
            .chain(self.decoder.tensors_mut())
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.tensors().flat_map(|t| t.data().iter().copied()).collect()
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Runs one sample through the pipeline in the mode the parameters were
/// built for.
///
/// Channel realizations come from `channels`; dropout draws from
/// `dropout_rng` when `training` is set. The label is needed because the
/// sensing return's SNR depends on what the target is.
pub fn forward<T: Real>(
    params: &ModelParams<T>,
    image: Tensor<T>,
    label: BinaryLabel,
    link: &LinkConfig,
    channels: &mut dyn ChannelSource,
    training: bool,
    dropout_rng: Option<&mut Rng>,
) -> Result<ForwardPass<T>> {
    let cfg = params.config;
    let kind = link.kind();

    let (e1_out, e1_traces) = params.encoder1.forward(image, training, dropout_rng)?;
    if e1_out.len() != cfg.n_c1 {
        return Err(Error::Config(format!(
            "encoder 1 produced {} symbols, expected {}",
            e1_out.len(),
            cfg.n_c1
        )));
    }
    let (s1, e1_norm) = normalize_power(&e1_out);

    let comm1 = match cfg.mode {
        Mode::Joint => Some(channels.draw(kind, cfg.n_c1, link.channel.snr_db)?),
        Mode::SensingOnly => None,
    };
    let sensing = channels.draw(kind, cfg.n_c1, link.sensing.snr_db(label))?;
    let y_t = apply_realization(&s1, &sensing)?;

    let (e2_out, e2_traces) = params.encoder2.forward(y_t, training, None)?;
    let (s2, e2_norm) = normalize_power(&e2_out);
    let comm2 = channels.draw(kind, cfg.n_c2, link.channel.snr_db)?;
    let y_r2 = apply_realization(&s2, &comm2)?;

    let decoder_in = match &comm1 {
        Some(r) => {
            let y_r1 = apply_realization(&s1, r)?;
            Tensor::vector([y_r1.data(), y_r2.data()].concat())
        }
        None => y_r2,
    };
    let (logits, d_traces) = params.decoder.forward(decoder_in, training, None)?;
    let probs = softmax_apply(&logits);

    Ok(ForwardPass {
        e1_traces,
        e1_out,
        e1_norm,
        e2_traces,
        e2_out,
        e2_norm,
        d_traces,
        probs,
        realizations: Realizations {
            comm1,
            sensing,
            comm2,
        },
    })
}

/// Backpropagates `dL/dlogits` through decoder, channels and both encoders,
/// accumulating into `grads`. Returns the gradient with respect to the
/// image.
pub fn backward<T: Real>(
    params: &ModelParams<T>,
    pass: &ForwardPass<T>,
    grad_logits: Tensor<T>,
    grads: &mut ModelGrads<T>,
) -> Result<Tensor<T>> {
    let cfg = params.config;
    let g_in = params
        .decoder
        .backward(&pass.d_traces, grad_logits, &mut grads.decoder)?;

    let (g_y1, g_y2) = match cfg.mode {
        Mode::Joint => {
            let (a, b) = g_in.data().split_at(cfg.n_c1);
            (Some(Tensor::vector(a.to_vec())), Tensor::vector(b.to_vec()))
        }
        Mode::SensingOnly => (None, g_in),
    };

    let r = &pass.realizations;
    let g_s2 = channel_backward(&r.comm2, &g_y2);
    let g_e2_out = normalize_power_backward(&pass.e2_out, pass.e2_norm, &g_s2);
    let g_yt = params
        .encoder2
        .backward(&pass.e2_traces, g_e2_out, &mut grads.encoder2)?;

    let mut g_s1 = channel_backward(&r.sensing, &g_yt);
    if let (Some(g_y1), Some(comm1)) = (g_y1, &r.comm1) {
        let direct = channel_backward(comm1, &g_y1);
        for (a, &b) in g_s1.data_mut().iter_mut().zip(direct.data()) {
            *a += b;
        }
    }
    let g_e1_out = normalize_power_backward(&pass.e1_out, pass.e1_norm, &g_s1);
    params
        .encoder1
        .backward(&pass.e1_traces, g_e1_out, &mut grads.encoder1)
}

/// Cross-entropy of one pass and the matching logit gradient.
pub fn loss_and_grad<T: Real>(pass: &ForwardPass<T>, label: BinaryLabel) -> Result<(f64, Tensor<T>)> {
    let target = onehot::<T>(label.index(), 2);
    let loss = cross_entropy(&pass.probs, &target)?;
    let grad = cross_entropy_logit_grad(&pass.probs, &target)?;
    Ok((loss, grad))
}

/// Inference on one sample: dropout off, one channel realization drawn from
/// `rng`.
pub fn predict<T: Real>(
    params: &ModelParams<T>,
    sample: &ImageSample,
    link: &LinkConfig,
    rng: &mut Rng,
) -> Result<Prediction> {
    let pass = forward(params, sample.pixels(), sample.label2(), link, rng, false, None)?;
    Ok(pass.prediction())
}

/// Predictions for every sample, drawing channels from one stream in order.
pub fn predict_all<T: Real>(
    params: &ModelParams<T>,
    samples: &[ImageSample],
    link: &LinkConfig,
    rng: &mut Rng,
) -> Result<Vec<Prediction>> {
    samples.iter().map(|s| predict(params, s, link, rng)).collect()
}
