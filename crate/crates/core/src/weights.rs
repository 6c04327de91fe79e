//! Per-batch importance weights for long-tailed anomaly scores.
//!
//! The raw scores `s` play the role of the proposal distribution `q`, and a
//! Gaussian fitted to their Box-Cox transform plays the target `p`; each
//! sample is weighted by `p / q`. Weights are capped by a skewness-driven
//! bound so that a heavy tail cannot blow up the gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{
    box_cox_transform, fit_box_cox_lambda, gaussian_pdf, shift_positive, skewness,
    trimmed_gaussian_fit, ScoreBatch, TrimmedGaussian, PDF_FLOOR,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IwlConfig {
    /// Positivity shift and lower bound on the skewness-driven cap.
    pub epsilon: f64,
    /// Multiplier applied to |skewness| to obtain the cap.
    pub alpha: f64,
    /// Hard upper bound on the cap.
    pub t0: f64,
    /// Rescale weights to unit mean before clipping. Off by default.
    pub normalize: bool,
}

impl Default for IwlConfig {
    fn default() -> Self {
        IwlConfig {
            epsilon: 1e-4,
            alpha: 4.0,
            t0: 20.0,
            normalize: false,
        }
    }
}

impl IwlConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("alpha", self.alpha)?;
        positive("t0", self.t0)
    }

    /// `min(alpha * max(|skew|, epsilon), t0)`.
    pub fn cap_for(&self, skew: f64) -> f64 {
        (self.alpha * skew.abs().max(self.epsilon)).min(self.t0)
    }
}

/// Weights aligned 1:1 with a batch, all in `[0, cap]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub cap: f64,
}

impl WeightVector {
    pub fn ones(n: usize) -> Self {
        WeightVector {
            weights: vec![1.0; n],
            cap: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }
}

/// Intermediate quantities of one weight computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTrace {
    /// Skewness of the raw batch; `None` for a constant batch.
    pub skewness: Option<f64>,
    pub lambda: Option<f64>,
    pub score_fit: Option<TrimmedGaussian>,
    pub transformed_fit: Option<TrimmedGaussian>,
    /// The constant-batch fallback produced the weights.
    pub degenerate: bool,
}

fn degenerate(n: usize, config: &IwlConfig) -> (WeightVector, WeightTrace) {
    (
        WeightVector {
            weights: vec![1.0; n],
            cap: config.t0,
        },
        WeightTrace {
            skewness: None,
            lambda: None,
            score_fit: None,
            transformed_fit: None,
            degenerate: true,
        },
    )
}

/// Computes the capped importance weights for one batch of anomaly scores.
///
/// A constant batch has no defined skewness or Box-Cox fit and gets unit
/// weights with cap `t0`.
pub fn compute_weights(scores: &ScoreBatch, config: &IwlConfig) -> Result<WeightVector> {
    compute_weights_traced(scores, config).map(|(w, _)| w)
}

/// [`compute_weights`] that also returns the intermediate fits.
pub fn compute_weights_traced(
    scores: &ScoreBatch,
    config: &IwlConfig,
) -> Result<(WeightVector, WeightTrace)> {
    config.validate()?;
    let n = scores.len();
    if n < 2 {
        return Err(Error::TooFewValues { needed: 2, got: n });
    }

    let skew = match skewness(scores.values()) {
        Ok(v) => v,
        Err(Error::DegenerateSample) => return Ok(degenerate(n, config)),
        Err(e) => return Err(e),
    };
    let shifted = shift_positive(scores, config.epsilon);
    let lambda = match fit_box_cox_lambda(&shifted) {
        Ok(fit) => fit.lambda,
        Err(Error::DegenerateSample) => return Ok(degenerate(n, config)),
        Err(e) => return Err(e),
    };
    let transformed = box_cox_transform(&shifted, lambda)?;

    let score_fit = trimmed_gaussian_fit(shifted.values(), config.epsilon)?;
    let transformed_fit = trimmed_gaussian_fit(&transformed, config.epsilon)?;
    let p_score = gaussian_pdf(shifted.values(), &score_fit);
    let p_transformed = gaussian_pdf(&transformed, &transformed_fit);

    let mut weights: Vec<f64> = p_transformed
        .iter()
        .zip(&p_score)
        .map(|(&pb, &ps)| pb / ps.max(PDF_FLOOR))
        .collect();

    if config.normalize {
        let mean = weights.iter().sum::<f64>() / n as f64;
        if mean > 0.0 && mean.is_finite() {
            weights.iter_mut().for_each(|w| *w /= mean);
        }
    }

    let cap = config.cap_for(skew);
    for w in &mut weights {
        *w = w.clamp(0.0, cap);
    }

    Ok((
        WeightVector { weights, cap },
        WeightTrace {
            skewness: Some(skew),
            lambda: Some(lambda),
            score_fit: Some(score_fit),
            transformed_fit: Some(transformed_fit),
            degenerate: false,
        },
    ))
}

/// `(1/N) * sum(w_i * loss_i)`.
pub fn weighted_loss(per_sample_losses: &[f64], weights: &WeightVector) -> Result<f64> {
    if per_sample_losses.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: per_sample_losses.len(),
            got: weights.len(),
        });
    }
    if per_sample_losses.is_empty() {
        return Err(Error::EmptySample);
    }
    let total: f64 = per_sample_losses
        .iter()
        .zip(&weights.weights)
        .map(|(l, w)| l * w)
        .sum();
    Ok(total / per_sample_losses.len() as f64)
}
