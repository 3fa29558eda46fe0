//! Desk-scale toolkit for unpaired image translation with uncertainty.
//!
//! The pieces, bottom up:
//!
//! - [`tensor`] / [`tape`] / [`ops`]: dense f32 tensors with reverse-mode
//!   autodiff sufficient for small convolutional nets.
//! - [`optim`]: Adam.
//! - [`nn`]: conv/norm building blocks and initialization.
//! - [`stochastic`]: MC-Dropout, MC-DropConnect, Flipout, and ensembles
//!   behind one stochastic-forward contract.
//! - [`model`]: the paired-generator translation model with mean and
//!   log-variance heads, its losses, and the training loop.
//! - [`uncertainty`]: combining prediction samples into a Gaussian
//!   mixture and splitting its variance into aleatoric + epistemic maps.
//! - [`ood`]: histograms, ROC curves, and AUC for ID-vs-OOD scoring.
//! - [`datasets`]: procedural phantom/OOD image generators and PGM I/O.
//! - [`config`] / [`pipeline`]: experiment configs and the command
//!   implementations behind the CLI.

pub mod checkpoint;
pub mod config;
pub mod datasets;
pub mod error;
pub mod gemm;
pub mod model;
pub mod nn;
pub mod ood;
pub mod ops;
pub mod optim;
pub mod pgm;
pub mod pipeline;
pub mod rng;
pub mod stochastic;
pub mod svg;
pub mod tape;
pub mod tensor;
pub mod uncertainty;

pub use error::{Error, Result};
pub use tape::{Tape, TensorRef};
pub use tensor::Tensor;
