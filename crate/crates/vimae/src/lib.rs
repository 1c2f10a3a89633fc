//! Variational InfoMax autoencoders at desk scale.
//!
//! This crate implements the VAE / β-VAE / InfoVAE / VIMAE family of
//! objectives over a small, deterministic reverse-mode autodiff core, with
//! MMD latent-prior matching, representation-robustness probes under input
//! corruption, and reconstruction/generation image artifacts.
//!
//! Everything is seeded and bitwise reproducible on one platform: training
//! runs, checkpoints, metrics logs and generated images are pure functions
//! of their configuration.
//!
//! See the `examples/` directory for one runnable program per capability,
//! or the `vimae` binary for the batch CLI.

pub mod cli;
pub mod data;
pub mod distributions;
pub mod divergence;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod objectives;
pub mod pgm;
pub mod seeded;
pub mod tensor;
pub mod training;

pub use data::{Corruption, Dataset};
pub use distributions::{GaussianPosterior, Prior, PriorKind};
pub use divergence::{CrossCoefficient, Kernel, KernelKind, MmdConfig};
pub use error::{Error, Result};
pub use evaluation::{EvalReport, ProbeKind, ProbeResult};
pub use models::{Activation, Architecture, EncoderKind, Model};
pub use objectives::{Family, LossReport, ObjectiveConfig};
pub use tensor::{Tape, Tensor};
pub use training::{AdamHyper, AdamState, TrainConfig};
