//! Digit-string recognition with a residual convolutional feature extractor,
//! a two-direction LSTM head and a CTC output layer, all in `f64` with
//! hand-written forward and backward passes.
//!
//! The crate is organised bottom-up:
//!
//! - [`ctc`]: collapse map, exact CTC loss and gradients, brute-force oracle.
//! - [`decode`]: best-path, prefix beam search and exhaustive decoding.
//! - [`tensor`], [`layers`], [`params`]: the trainable layer zoo.
//! - [`net`]: the full network assembled from a [`net::NetworkConfig`].
//! - [`optim`], [`train`]: ADADELTA and the training loop.
//! - [`synth`]: synthetic dataset generation, PGM images and manifests.
//! - [`metrics`]: string-level recognition rate.
//! - [`checkpoint`], [`config`]: on-disk formats.
//! - [`gradcheck`]: finite-difference checks of every backward pass.

pub mod checkpoint;
pub mod config;
pub mod ctc;
pub mod decode;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod params;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
