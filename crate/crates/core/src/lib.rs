//! No-reference image quality assessment through hallucinated
//! pseudo-reference features.
//!
//! Training is pairwise: a full-reference branch extracts features of the
//! pristine and distorted patches while a no-reference branch extracts a
//! single fusion feature from the distorted patch alone. A stack of affine
//! coupling blocks splits the fusion feature losslessly into a
//! pseudo-reference and a pseudo-distortion half, which a triplet loss ties
//! to the full-reference features. Patch scores are pooled into an image
//! score by a GRU attention head. At test time only the no-reference path
//! runs.
//!
//! The crate is organised by stage:
//!
//! - [`dataset`]: database adapters, DMOS normalization, splits, patches, batches
//! - [`nets`]: feature extractors and the invertible split
//! - [`aggregate`]: patch-to-image pooling heads
//! - [`objective`]: triplet and regression losses
//! - [`model`]: the assembled network and its ablation variants
//! - [`trainer`]: optimisation loop, checkpoints, training log
//! - [`evaluate`]: correlation metrics, prediction, protocols, t-SNE export
//! - [`cli`]: run configuration and the command implementations

pub mod aggregate;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod model;
pub mod nets;
pub mod objective;
pub mod seed;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
