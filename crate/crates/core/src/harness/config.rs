use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::channel::{ChannelConfig, ChannelKind, SensingConfig};
use crate::error::{Error, Result};
use crate::models::{Mode, ModelConfig, Precision, TrainConfig};
use crate::nn::AdamConfig;

/// Every knob of one experiment. Defaults are the reference setting: 3 dB
/// communication SNR, -3 dB vehicle sensing SNR with animals 6 dB lower,
/// 20 channel uses per encoder, 5 epochs of batch 64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelKind,
    pub comm_snr_db: f64,
    pub vehicle_sensing_snr_db: f64,
    pub animal_offset_db: f64,
    /// Output size of both encoders (`n_c1 = n_c2`).
    pub output_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub eval_seed: u64,
    pub mode: Mode,
    pub precision: Precision,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            channel: ChannelKind::Awgn,
            comm_snr_db: 3.0,
            vehicle_sensing_snr_db: -3.0,
            animal_offset_db: 6.0,
            output_size: 20,
            epochs: 5,
            batch_size: 64,
            seed: 0,
            eval_seed: 0,
            mode: Mode::Joint,
            precision: Precision::F32,
        }
    }
}

impl ExperimentConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            n_c1: self.output_size,
            n_c2: self.output_size,
            mode: self.mode,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            channel: ChannelConfig {
                kind: self.channel,
                snr_db: self.comm_snr_db,
            },
            sensing: SensingConfig {
                vehicle_snr_db: self.vehicle_sensing_snr_db,
                animal_offset_db: self.animal_offset_db,
            },
            seed: self.seed,
            eval_seed: self.eval_seed,
            precision: self.precision,
            adam: AdamConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("comm_snr_db", self.comm_snr_db),
            ("vehicle_sensing_snr_db", self.vehicle_sensing_snr_db),
            ("animal_offset_db", self.animal_offset_db),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        self.model_config().validate()?;
        self.train_config().validate()
    }

    /// Encoder-1 output size over the 3,072 image values, in percent.
    pub fn compression_rate_percent(&self) -> f64 {
        compression_rate_percent(self.output_size)
    }

    /// Applies `key = value` overrides. Keys may use dashes or underscores;
    /// `sensing-snr-db`, `offset-db` and `n-c` are accepted as short forms.
    pub fn apply_overrides(&mut self, overrides: &Map<String, Value>) -> Result<()> {
        let mut current = match serde_json::to_value(&*self)? {
            Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        for (key, value) in overrides {
            let key = canonical_key(key);
            if !current.contains_key(&key) {
                return Err(Error::Config(format!("unknown config key {key:?}")));
            }
            current.insert(key, value.clone());
        }
        *self = serde_json::from_value(Value::Object(current))
            .map_err(|e| Error::Config(format!("bad config value: {e}")))?;
        Ok(())
    }

    /// Reads a JSON object or `key = value` lines (with `#` comments) and
    /// applies it on top of `self`.
    pub fn merge_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let text = fs::read_to_string(path.as_ref())?;
        let overrides = parse_config_text(&text)?;
        self.apply_overrides(&overrides)
    }
}

pub fn compression_rate_percent(output_size: usize) -> f64 {
    100.0 * output_size as f64 / crate::dataset::IMAGE_BYTES as f64
}

fn canonical_key(key: &str) -> String {
    let k = key.trim().replace('-', "_");
    match k.as_str() {
        "sensing_snr_db" => "vehicle_sensing_snr_db".into(),
        "offset_db" => "animal_offset_db".into(),
        "n_c" => "output_size".into(),
        _ => k,
    }
}

/// Keys that belong to the command line rather than the experiment.
pub const NON_EXPERIMENT_KEYS: [&str; 5] = ["data_dir", "out", "format", "jobs", "points"];

pub fn parse_config_text(text: &str) -> Result<Map<String, Value>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        return match serde_json::from_str::<Value>(text)? {
            Value::Object(m) => Ok(m),
            _ => Err(Error::Config("config JSON must be an object".into())),
        };
    }
    let mut map = Map::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        let v = v.trim().trim_matches('"');
        let value = if let Ok(i) = v.parse::<u64>() {
            Value::from(i)
        } else if let Ok(f) = v.parse::<f64>() {
            Value::from(f)
        } else {
            Value::from(v)
        };
        map.insert(k.trim().to_string(), value);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_reference_setting() {
        let c = ExperimentConfig::default();
        assert_eq!(c.comm_snr_db, 3.0);
        assert_eq!(c.vehicle_sensing_snr_db, -3.0);
        assert_eq!(c.animal_offset_db, 6.0);
        assert_eq!(c.output_size, 20);
        assert_eq!((c.epochs, c.batch_size), (5, 64));
        assert_eq!(format!("{:.2}%", c.compression_rate_percent()), "0.65%");
    }

    #[test]
    fn key_value_file() {
        let text =
            "# comment\nchannel = rayleigh\ncomm-snr-db = 6\noffset-db=0\nmode = sensing-only\nseed = 7\n";
        let mut c = ExperimentConfig::default();
        c.apply_overrides(&parse_config_text(text).unwrap()).unwrap();
        assert_eq!(c.channel, ChannelKind::Rayleigh);
        assert_eq!(c.comm_snr_db, 6.0);
        assert_eq!(c.animal_offset_db, 0.0);
        assert_eq!(c.mode, Mode::SensingOnly);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn json_file_and_unknown_keys() {
        let mut c = ExperimentConfig::default();
        let m = parse_config_text(r#"{"output_size": 8, "epochs": 2}"#).unwrap();
        c.apply_overrides(&m).unwrap();
        assert_eq!((c.output_size, c.epochs), (8, 2));
        let bad = parse_config_text("warp = 9").unwrap();
        assert!(c.apply_overrides(&bad).is_err());
        let bad_value = parse_config_text("channel = foo").unwrap();
        assert!(c.apply_overrides(&bad_value).is_err());
    }
}
