//! Checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "SCOMCKPT"
//! header_len u32      byte length of the JSON header
//! header     JSON     {"version", "model", "seed", "tensors": [{"name", "shape"}]}
//! payload    f32 LE   every tensor in header order, row-major
//! ```
//!
//! Tensors are listed encoder 1, encoder 2, decoder; within each network in
//! layer order, weights before bias.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

pub const MAGIC: &[u8; 8] = b"SCOMCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub model: ModelConfig,
    pub seed: u64,
    pub tensors: Vec<TensorEntry>,
}

fn tensor_names<T: Real>(params: &ModelParams<T>) -> Vec<String> {
    let mut names = Vec::new();
    for (net_name, net) in [
        ("encoder1", &params.encoder1),
        ("encoder2", &params.encoder2),
        ("decoder", &params.decoder),
    ] {
        for (i, _) in net.params().enumerate() {
            names.push(format!("{net_name}.{i}.weights"));
            names.push(format!("{net_name}.{i}.bias"));
        }
    }
    names
}

pub fn to_bytes<T: Real>(params: &ModelParams<T>, seed: u64) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        version: VERSION,
        model: params.config,
        seed,
        tensors: tensor_names(params)
            .into_iter()
            .zip(params.tensors())
            .map(|(name, t)| TensorEntry {
                name,
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + json.len() + 4 * params.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in params.tensors() {
        for v in t.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes<T: Real>(bytes: &[u8]) -> Result<(ModelParams<T>, CheckpointHeader)> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic"));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_end = 12 + header_len;
    if bytes.len() < header_end {
        return Err(bad("truncated header"));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[12..header_end])?;
    if header.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {}",
            header.version
        )));
    }
    // Rebuild the architecture, then overwrite every tensor.
    let mut params = ModelParams::<T>::seeded(header.model, header.seed)?;
    let expected: Vec<Vec<usize>> = params.tensors().map(|t| t.shape().to_vec()).collect();
    let listed: Vec<Vec<usize>> = header.tensors.iter().map(|t| t.shape.clone()).collect();
    if expected != listed {
        return Err(bad("tensor shapes do not match the model config"));
    }
    let payload = &bytes[header_end..];
    if payload.len() != 4 * params.param_count() {
        return Err(Error::Checkpoint(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            4 * params.param_count()
        )));
    }
    let mut values = payload
        .chunks_exact(4)
        .map(|c| T::cast(f32::from_le_bytes(c.try_into().unwrap()) as f64));
    for t in params.tensors_mut() {
        let data: Vec<T> = values.by_ref().take(t.len()).collect();
        *t = Tensor::from_vec(t.shape(), data)?;
    }
    Ok((params, header))
}

pub fn save<T: Real>(params: &ModelParams<T>, seed: u64, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(params, seed)?)?;
    Ok(())
}

pub fn load<T: Real>(path: impl AsRef<Path>) -> Result<(ModelParams<T>, CheckpointHeader)> {
    from_bytes(&fs::read(path)?)
}
