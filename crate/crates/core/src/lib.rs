//! Importance-weighted loss for anomaly detectors whose score distribution
//! is long-tailed.
//!
//! Class imbalance inside the normal data shows up as a right-skewed anomaly
//! score distribution. [`weights::compute_weights`] reweights each mini-batch
//! so that the effective score distribution matches a Gaussian fitted to the
//! Box-Cox transform of the scores, with a skewness-driven cap on every
//! weight.
//!
//! Modules:
//! - [`stats`]: median/MAD, skewness, trimmed Gaussian fit, Box-Cox.
//! - [`weights`]: the per-batch weight pipeline and weighted loss.
//! - [`nn`]: dense layers, batch norm, backprop, Adam.
//! - [`models`]: autoencoder and DSVDD hosts plus training loops.
//! - [`datagen`]: synthetic imbalanced two-cluster data and CSV loading.
//! - [`metrics`]: AUROC, AUPR, log-score skewness.

pub mod datagen;
mod error;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod stats;
pub mod weights;

pub use datagen::{generate, load_csv, Label, LabeledDataset, Provenance, SyntheticSpec};
pub use error::{Error, Result};
pub use metrics::{aupr, auroc, evaluate, log_score_skewness, EvalReport};
pub use models::{ArchConfig, HostModel, LossMode, ModelKind, TrainConfig, TrainLog};
pub use nn::{DenseNetwork, Matrix};
pub use stats::{BoxCoxFit, ScoreBatch, TrimmedGaussian};
pub use weights::{compute_weights, weighted_loss, IwlConfig, WeightVector};
