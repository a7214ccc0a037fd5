//! Learned joint sensing and communication for transmitter identification:
//! two encoders at the transmitter, a decoder at the receiver, simulated
//! AWGN and Rayleigh links in between, all trained end to end.

pub mod channel;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod models;
pub mod nn;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/layers.md")]
    mod layers {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/checkpoints.md")]
    mod checkpoints {}
    #[doc = include_str!("../../../book/src/gradcheck.md")]
    mod gradcheck {}
}
