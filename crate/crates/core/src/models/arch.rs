use serde::{Deserialize, Serialize};

use crate::dataset::{IMAGE_CHANNELS, IMAGE_SIDE};
use crate::error::{Error, Result};
use crate::nn::{Layer, LayerParams, Network, Real, Rng, Tensor};

pub const DROPOUT_RATE: f64 = 0.1;

/// Which received signals the decoder sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Both rounds: the image features and the encoded sensing return.
    Joint,
    /// Only the second round, the encoded sensing return.
    #[serde(alias = "sensing_only")]
    SensingOnly,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Joint => "joint",
            Mode::SensingOnly => "sensing-only",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Mode::Joint),
            "sensing-only" | "sensing_only" => Ok(Mode::SensingOnly),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_c1: usize,
    pub n_c2: usize,
    pub mode: Mode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_c1: 20,
            n_c2: 20,
            mode: Mode::Joint,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_c1 == 0 || self.n_c2 == 0 {
            return Err(Error::Config(format!(
                "encoder output sizes must be at least 1 (got {} and {})",
                self.n_c1, self.n_c2
            )));
        }
        if self.decoder_input() < 2 {
            return Err(Error::Config("decoder input must have at least 2 entries".into()));
        }
        Ok(())
    }

    pub fn decoder_input(&self) -> usize {
        match self.mode {
            Mode::Joint => self.n_c1 + self.n_c2,
            Mode::SensingOnly => self.n_c2,
        }
    }
}

/// Encoder 1: image to `n_c1` channel symbols.
///
/// Conv(8) ReLU, Conv(4) ReLU, MaxPool, Dropout, Conv(4) ReLU, MaxPool,
/// Dropout, Flatten, Dense(128) ReLU, Dense(n_c1). All convolutions are 3x3
/// with valid padding, so a 32x32 input flattens to 6*6*4 = 144.
pub fn build_encoder1<T: Real>(n_c1: usize, rng: &mut Rng) -> Result<Network<T>> {
    if n_c1 == 0 {
        return Err(Error::Config("n_c1 must be at least 1".into()));
    }
    let side = ((IMAGE_SIDE - 4) / 2 - 2) / 2;
    let flat = side * side * 4;
    Ok(Network::new(vec![
        Layer::Conv2d(LayerParams::init_conv2d((3, 3), IMAGE_CHANNELS, 8, rng)?),
        Layer::Relu,
        Layer::Conv2d(LayerParams::init_conv2d((3, 3), 8, 4, rng)?),
        Layer::Relu,
        Layer::MaxPool2d,
        Layer::Dropout(DROPOUT_RATE),
        Layer::Conv2d(LayerParams::init_conv2d((3, 3), 4, 4, rng)?),
        Layer::Relu,
        Layer::MaxPool2d,
        Layer::Dropout(DROPOUT_RATE),
        Layer::Flatten,
        Layer::Dense(LayerParams::init_dense(flat, 128, rng)?),
        Layer::Relu,
        Layer::Dense(LayerParams::init_dense(128, n_c1, rng)?),
    ]))
}

/// Encoder 2: sensed return (`n_c1`) to `n_c2` channel symbols, with a
/// hidden layer of `floor((n_c1 + n_c2) / 2)`.
pub fn build_encoder2<T: Real>(n_c1: usize, n_c2: usize, rng: &mut Rng) -> Result<Network<T>> {
    if n_c1 == 0 || n_c2 == 0 {
        return Err(Error::Config("encoder sizes must be at least 1".into()));
    }
    let hidden = (n_c1 + n_c2) / 2;
    Ok(Network::new(vec![
        Layer::Dense(LayerParams::init_dense(n_c1, n_c1, rng)?),
        Layer::Relu,
        Layer::Dense(LayerParams::init_dense(n_c1, hidden, rng)?),
        Layer::Relu,
        Layer::Dense(LayerParams::init_dense(hidden, n_c2, rng)?),
    ]))
}

/// Decoder: `d_in` received symbols to two logits. The softmax is applied
/// by the pipeline together with the loss.
pub fn build_decoder<T: Real>(d_in: usize, rng: &mut Rng) -> Result<Network<T>> {
    if d_in < 2 {
        return Err(Error::Config(format!("decoder input {d_in} must be at least 2")));
    }
    let hidden = d_in / 2;
    Ok(Network::new(vec![
        Layer::Dense(LayerParams::init_dense(d_in, d_in, rng)?),
        Layer::Relu,
        Layer::Dense(LayerParams::init_dense(d_in, hidden, rng)?),
        Layer::Relu,
        Layer::Dense(LayerParams::init_dense(hidden, 2, rng)?),
    ]))
}

/// Weights of the two encoders and the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub encoder1: Network<T>,
    pub encoder2: Network<T>,
    pub decoder: Network<T>,
}

impl<T: Real> ModelParams<T> {
    /// Builds all three networks from one rng, encoder 1 first, so joint and
    /// sensing-only models with the same seed share their encoder weights at
    /// initialization.
    pub fn new(config: ModelConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let encoder1 = build_encoder1(config.n_c1, rng)?;
        let encoder2 = build_encoder2(config.n_c1, config.n_c2, rng)?;
        let decoder = build_decoder(config.decoder_input(), rng)?;
        Ok(ModelParams {
            config,
            encoder1,
            encoder2,
            decoder,
        })
    }

    pub fn seeded(config: ModelConfig, seed: u64) -> Result<Self> {
        Self::new(config, &mut Rng::new(seed))
    }

    /// Every weight and bias tensor: encoder 1, encoder 2, then the decoder.
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

    pub fn param_count(&self) -> usize {
        self.encoder1.param_count() + self.encoder2.param_count() + self.decoder.param_count()
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.tensors().flat_map(|t| t.data().iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        let total = self.param_count();
        if flat.len() != total {
            return Err(Error::shape("flat parameters", &[total], &[flat.len()]));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config,
            encoder1: self.encoder1.cast(),
            encoder2: self.encoder2.cast(),
            decoder: self.decoder.cast(),
        }
    }
}
