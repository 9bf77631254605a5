//! Multi-treatment uplift modeling.
//!
//! The crate is organised bottom-up:
//!
//! - [`numkit`]: dense matrices, feed-forward nets with manual backprop, Adam.
//! - [`heads`]: the three ways of injecting the treatment into a model
//!   (feature concatenation, per-arm branches, Legendre coefficient heads).
//! - [`model`]: backbones, balancing losses and the training loop.
//! - [`datagen`]: synthetic scenarios with known response surfaces, CSV IO.
//! - [`eval`]: Qini curves and the mean Qini score over treatment arms.
//!
//! Data-parallel loops go through [`exec::Exec`]; with the `parallel` feature
//! disabled everything runs on the calling thread with identical results.

pub mod datagen;
mod error;
pub mod eval;
pub mod exec;
pub mod heads;
pub mod model;
pub mod numkit;

pub use error::{Error, Result};
