use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ArchConfig;
use crate::error::{Error, Result};
use crate::nn::{DenseNetwork, Matrix};
use crate::stats::ScoreBatch;

/// Center coordinates closer to zero than this are pushed out to it.
pub const CENTER_MIN_ABS: f64 = 0.1;

/// One-class descriptor: a bias-free encoder and a fixed latent center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsvddModel {
    pub encoder: DenseNetwork,
    pub center: Option<Vec<f64>>,
}

impl DsvddModel {
    pub fn new(input_dim: usize, arch: &ArchConfig, rng: &mut impl Rng) -> Result<Self> {
        arch.validate()?;
        let encoder = DenseNetwork::new(&arch.encoder_specs(input_dim, false), rng)?;
        Self::from_encoder(encoder)
    }

    /// Rejects encoders with any bias or batch-norm shift parameters.
    pub fn from_encoder(encoder: DenseNetwork) -> Result<Self> {
        if encoder.bias_parameter_count() != 0 {
            return Err(Error::InvalidConfig(
                "DSVDD encoder layers must not carry bias parameters".into(),
            ));
        }
        Ok(DsvddModel {
            encoder,
            center: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }
}

/// Mean eval-mode embedding of `data`, with near-zero coordinates snapped to
/// `±0.1` (zero goes to `+0.1`).
pub fn dsvdd_init_center(model: &DsvddModel, data: &Matrix) -> Result<Vec<f64>> {
    if data.rows() == 0 {
        return Err(Error::EmptySample);
    }
    let z = model.encoder.predict(data)?;
    let mut center = z.column_means();
    for c in &mut center {
        if c.abs() < CENTER_MIN_ABS {
            *c = if *c < 0.0 { -CENTER_MIN_ABS } else { CENTER_MIN_ABS };
        }
    }
    Ok(center)
}

/// Per-row squared distance of the eval-mode embedding to the center.
pub fn dsvdd_scores(model: &DsvddModel, batch: &Matrix) -> Result<ScoreBatch> {
    let center = model.center.as_ref().ok_or(Error::CenterNotInitialized)?;
    let z = model.encoder.predict(batch)?;
    ScoreBatch::new(
        z.iter_rows()
            .map(|r| r.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum())
            .collect(),
    )
}
