//! Encoder 1, encoder 2 and the decoder, the pipelines that connect them
//! through the channels, and joint training.

pub mod arch;
pub mod checkpoint;
pub mod e2e_check;
pub mod pipeline;
pub mod train;

pub use arch::{build_decoder, build_encoder1, build_encoder2, Mode, ModelConfig, ModelParams};
pub use pipeline::{forward, predict, predict_all, LinkConfig, ModelGrads, Prediction, Realizations};
pub use train::{train, train_with, EpochRecord, History, Precision, TrainConfig};
