//! Leaky-time-constant-aware spiking neural networks (τ-SNN).
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, a seeded counter-based RNG, finite differences
//! - [`neuron`]: discrete LIF dynamics, reset rules, surrogate gradient
//! - [`encoding`]: direct-input encoders for static, dynamic and series inputs
//! - [`network`]: the layered spiking model, loss, and BPTT
//! - [`training`]: optimizers, the training loop, evaluation, checkpoints
//! - [`data`]: MNIST IDX and series CSV loaders plus synthetic generators
//! - [`experiments`]: τ sweeps, weight statistics, firing rates, tolerance windows
//! - [`hwmap`]: software/hardware τ conversion and the device catalog

pub mod data;
pub mod encoding;
pub mod error;
pub mod experiments;
pub mod hwmap;
pub mod network;
pub mod neuron;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
