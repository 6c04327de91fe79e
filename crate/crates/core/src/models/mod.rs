//! Host anomaly detectors and their training loops.

mod autoencoder;
mod dsvdd;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{LayerSpec, DEFAULT_LEAKY_SLOPE};
use crate::weights::IwlConfig;

pub use autoencoder::{ae_scores, Autoencoder};
pub use dsvdd::{dsvdd_init_center, dsvdd_scores, DsvddModel, CENTER_MIN_ABS};
pub use train::{
    train, train_autoencoder, train_autoencoder_with, train_dsvdd, train_dsvdd_with, BatchLog,
    BatchWeighting, EpochLog, HostModel, ImportanceWeights, Phase, TrainLog, UnitWeights,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ae,
    Dsvdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    Mse,
    Iwl,
}

impl std::fmt::Display for LossMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossMode::Mse => "mse",
            LossMode::Iwl => "iwl",
        })
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Ae => "ae",
            ModelKind::Dsvdd => "dsvdd",
        })
    }
}

/// Encoder layout: `dense -> BN -> leaky ReLU` per hidden width, then a
/// final dense projection to `latent`. Decoders mirror it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub hidden: Vec<usize>,
    pub latent: usize,
    pub leaky_slope: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            hidden: vec![64, 32],
            latent: 4,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

impl ArchConfig {
    /// `bias` controls dense biases and batch-norm affine shifts together.
    pub fn encoder_specs(&self, input_dim: usize, bias: bool) -> Vec<LayerSpec> {
        let mut widths = vec![input_dim];
        widths.extend(&self.hidden);
        widths.push(self.latent);
        chain(&widths, bias, self.leaky_slope)
    }

    pub fn decoder_specs(&self, output_dim: usize, bias: bool) -> Vec<LayerSpec> {
        let mut widths = vec![self.latent];
        widths.extend(self.hidden.iter().rev());
        widths.push(output_dim);
        chain(&widths, bias, self.leaky_slope)
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        if !(self.leaky_slope >= 0.0) {
            return Err(Error::InvalidConfig("leaky_slope must be non-negative".into()));
        }
        Ok(())
    }
}

fn chain(widths: &[usize], bias: bool, slope: f64) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    for (i, pair) in widths.windows(2).enumerate() {
        specs.push(LayerSpec::Dense {
            input: pair[0],
            output: pair[1],
            bias,
        });
        if i + 2 < widths.len() {
            specs.push(LayerSpec::BatchNorm {
                dim: pair[1],
                affine: bias,
            });
            specs.push(LayerSpec::LeakyRelu { slope });
        }
    }
    specs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Autoencoder pretraining epochs before the DSVDD phase.
    pub pretrain_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub loss_mode: LossMode,
    pub iwl: IwlConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            pretrain_epochs: 20,
            batch_size: 64,
            learning_rate: 1e-4,
            weight_decay: 1e-6,
            loss_mode: LossMode::Mse,
            iwl: IwlConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig(
                "batch_size must be >= 2 for batch statistics".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::InvalidConfig("weight_decay must be non-negative".into()));
        }
        self.iwl.validate()
    }
}

/// SplitMix64 finalizer over `(seed, stream, index)`, used to derive
/// independent RNG seeds for initialization and per-epoch shuffles.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
