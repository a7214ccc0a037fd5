//! Differentiable channel layers.
//!
//! Every transmitted vector is scaled to unit average power first, so the
//! configured SNR fixes the noise variance. A channel use multiplies the
//! signal by one gain (1 for AWGN, a Rayleigh draw otherwise) and adds white
//! Gaussian noise. In the backward pass the realization is a constant: the
//! gradient is scaled by the gain and the noise contributes nothing.
//!
//! The sensing return uses the same mechanics with an SNR picked by the
//! target's class; that SNR is the only place the label enters the signal.

use std::collections::VecDeque;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::BinaryLabel;
use crate::error::{Error, Result};
use crate::nn::{Real, Rng, Tensor};

/// Added to the norm in [`normalize_power`] so an all-zero vector maps to
/// zero instead of NaN.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Rayleigh => "rayleigh",
        })
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "awgn" => Ok(ChannelKind::Awgn),
            "rayleigh" => Ok(ChannelKind::Rayleigh),
            other => Err(Error::Config(format!("unknown channel kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    pub snr_db: f64,
}

/// Class-dependent sensing SNR: vehicles return at `vehicle_snr_db`, animals
/// `animal_offset_db` lower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingConfig {
    pub vehicle_snr_db: f64,
    pub animal_offset_db: f64,
}

impl Default for SensingConfig {
    fn default() -> Self {
        SensingConfig {
            vehicle_snr_db: -3.0,
            animal_offset_db: 6.0,
        }
    }
}

impl SensingConfig {
    pub fn snr_db(&self, label: BinaryLabel) -> f64 {
        match label {
            BinaryLabel::Vehicle => self.vehicle_snr_db,
            BinaryLabel::Animal => self.vehicle_snr_db - self.animal_offset_db,
        }
    }
}

/// One sampled channel use: gain `h` and the additive noise `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub gain: f64,
    pub noise: Vec<f64>,
}

/// Noise standard deviation for unit signal power: `sqrt(10^(-snr_db/10))`.
pub fn noise_std(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0).sqrt()
}

/// Draws a realization for a signal of `len` elements. The gain is drawn
/// before the noise.
pub fn sample_realization(kind: ChannelKind, len: usize, snr_db: f64, rng: &mut Rng) -> ChannelRealization {
    let gain = match kind {
        ChannelKind::Awgn => 1.0,
        ChannelKind::Rayleigh => {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            (a * a + b * b).sqrt() / std::f64::consts::SQRT_2
        }
    };
    let sigma = noise_std(snr_db);
    let noise = (0..len)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    ChannelRealization { gain, noise }
}

/// `h * s + n` for a fixed realization.
pub fn apply_realization<T: Real>(s: &Tensor<T>, r: &ChannelRealization) -> Result<Tensor<T>> {
    if r.noise.len() != s.len() {
        return Err(Error::shape("channel noise", &[s.len()], &[r.noise.len()]));
    }
    let gain = T::cast(r.gain);
    let mut y = s.clone();
    for (v, &n) in y.data_mut().iter_mut().zip(&r.noise) {
        *v = gain * *v + T::cast(n);
    }
    Ok(y)
}

/// Passes a power-normalized signal through a freshly sampled channel.
pub fn apply_channel<T: Real>(
    s: &Tensor<T>,
    cfg: &ChannelConfig,
    rng: &mut Rng,
) -> Result<(Tensor<T>, ChannelRealization)> {
    let r = sample_realization(cfg.kind, s.len(), cfg.snr_db, rng);
    Ok((apply_realization(s, &r)?, r))
}

/// The reflected copy of `s` received back at the transmitter.
pub fn sensing_reflect<T: Real>(
    s: &Tensor<T>,
    label: BinaryLabel,
    sc: &SensingConfig,
    kind: ChannelKind,
    rng: &mut Rng,
) -> Result<(Tensor<T>, ChannelRealization)> {
    let cfg = ChannelConfig {
        kind,
        snr_db: sc.snr_db(label),
    };
    apply_channel(s, &cfg, rng)
}

pub fn channel_backward<T: Real>(r: &ChannelRealization, grad_out: &Tensor<T>) -> Tensor<T> {
    let gain = T::cast(r.gain);
    let mut g = grad_out.clone();
    g.data_mut().iter_mut().for_each(|v| *v *= gain);
    g
}

/// Scales `s` to unit average power: `s * sqrt(n) / (||s|| + eps)`.
/// Returns the output and the norm, which the backward pass needs.
pub fn normalize_power<T: Real>(s: &Tensor<T>) -> (Tensor<T>, f64) {
    let norm = s
        .data()
        .iter()
        .map(|v| v.as_f64() * v.as_f64())
        .sum::<f64>()
        .sqrt();
    let scale = T::cast((s.len() as f64).sqrt() / (norm + NORM_EPS));
    let mut y = s.clone();
    y.data_mut().iter_mut().for_each(|v| *v *= scale);
    (y, norm)
}

/// Vector-Jacobian product of [`normalize_power`]:
/// `sqrt(n)/(r+eps) * (g - s <s, g> / (r (r+eps)))`.
pub fn normalize_power_backward<T: Real>(s: &Tensor<T>, norm: f64, grad_out: &Tensor<T>) -> Tensor<T> {
    let n = s.len() as f64;
    let denom = norm + NORM_EPS;
    let dot: f64 = s
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(a, b)| a.as_f64() * b.as_f64())
        .sum();
    let radial = if norm > 0.0 { dot / (norm * denom) } else { 0.0 };
    let scale = n.sqrt() / denom;
    Tensor::vector(
        s.data()
            .iter()
            .zip(grad_out.data())
            .map(|(&si, &gi)| T::cast(scale * (gi.as_f64() - si.as_f64() * radial)))
            .collect(),
    )
}

pub fn mean_square<T: Real>(s: &Tensor<T>) -> f64 {
    s.data().iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>() / s.len() as f64
}

/// Where channel realizations come from during a forward pass.
pub trait ChannelSource {
    fn draw(&mut self, kind: ChannelKind, len: usize, snr_db: f64) -> Result<ChannelRealization>;
}

impl ChannelSource for Rng {
    fn draw(&mut self, kind: ChannelKind, len: usize, snr_db: f64) -> Result<ChannelRealization> {
        Ok(sample_realization(kind, len, snr_db, self))
    }
}

/// Hands back previously recorded realizations in order, so a forward pass
/// can be repeated with the channel frozen.
#[derive(Debug, Clone, Default)]
pub struct Replay {
    queue: VecDeque<ChannelRealization>,
}

impl Replay {
    pub fn new(realizations: impl IntoIterator<Item = ChannelRealization>) -> Self {
        Replay {
            queue: realizations.into_iter().collect(),
        }
    }
}

impl ChannelSource for Replay {
    fn draw(&mut self, _kind: ChannelKind, len: usize, _snr_db: f64) -> Result<ChannelRealization> {
        let r = self
            .queue
            .pop_front()
            .ok_or_else(|| Error::Config("replay ran out of channel realizations".into()))?;
        if r.noise.len() != len {
            return Err(Error::shape("replayed realization", &[len], &[r.noise.len()]));
        }
        Ok(r)
    }
}
