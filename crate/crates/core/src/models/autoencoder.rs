use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ArchConfig;
use crate::error::{Error, Result};
use crate::nn::{DenseNetwork, Matrix};
use crate::stats::ScoreBatch;

/// Reconstruction autoencoder with a mirrored decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub encoder: DenseNetwork,
    pub decoder: DenseNetwork,
}

impl Autoencoder {
    pub fn new(input_dim: usize, arch: &ArchConfig, rng: &mut impl Rng) -> Result<Self> {
        Self::with_bias(input_dim, arch, true, rng)
    }

    pub(crate) fn with_bias(
        input_dim: usize,
        arch: &ArchConfig,
        bias: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        arch.validate()?;
        let encoder = DenseNetwork::new(&arch.encoder_specs(input_dim, bias), rng)?;
        let decoder = DenseNetwork::new(&arch.decoder_specs(input_dim, bias), rng)?;
        Self::from_parts(encoder, decoder)
    }

    pub fn from_parts(encoder: DenseNetwork, decoder: DenseNetwork) -> Result<Self> {
        if decoder.input_dim() != encoder.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: encoder.output_dim(),
                got: decoder.input_dim(),
            });
        }
        if decoder.output_dim() != encoder.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: encoder.input_dim(),
                got: decoder.output_dim(),
            });
        }
        Ok(Autoencoder { encoder, decoder })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    /// Eval-mode reconstruction.
    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        let z = self.encoder.predict(x)?;
        self.decoder.predict(&z)
    }
}

/// Per-row squared reconstruction error, eval mode.
pub fn ae_scores(model: &Autoencoder, batch: &Matrix) -> Result<ScoreBatch> {
    let recon = model.reconstruct(batch)?;
    ScoreBatch::new(recon.row_sq_dist(batch)?)
}
