//! Robust scalar statistics and Box-Cox machinery.
//!
//! Everything here is a pure function of its inputs. The robust location and
//! scale estimators (median, MAD, modified z-score threshold) feed the trimmed
//! Gaussian fit, and the Box-Cox routines pick the power transform that makes
//! a positive, right-skewed batch look most Gaussian.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale factor relating the MAD of a Gaussian to its standard deviation.
pub const MAD_NORMAL_CONSISTENCY: f64 = 0.6745;

/// Modified z-score above which a value counts as an outlier.
pub const MODIFIED_Z_CUTOFF: f64 = 3.5;

/// Search interval for the Box-Cox exponent.
pub const LAMBDA_MIN: f64 = -5.0;
pub const LAMBDA_MAX: f64 = 5.0;
/// Number of points on the coarse lambda grid (step 0.1 over the interval).
pub const LAMBDA_GRID_POINTS: usize = 101;
/// Golden-section refinement stops once the bracket is narrower than this.
pub const LAMBDA_TOLERANCE: f64 = 1e-4;

/// Lower floor applied to density values so weight ratios stay finite.
pub const PDF_FLOOR: f64 = f64::MIN_POSITIVE;

/// Per-sample anomaly scores for one mini-batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreBatch(Vec<f64>);

impl ScoreBatch {
    /// Wraps `values`, rejecting empty input and non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(ScoreBatch(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ScoreBatch {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCoxFit {
    pub lambda: f64,
    /// Profile log-likelihood at `lambda`.
    pub log_likelihood: f64,
}

/// Gaussian moment fit on the values at or below the modified z-score
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimmedGaussian {
    pub mu: f64,
    pub sigma2: f64,
    pub threshold: f64,
    /// Number of values the moments were computed from.
    pub retained_count: usize,
    /// True when the trimmed set was unusable and the untrimmed sample (or
    /// the epsilon variance floor) was used instead.
    pub fallback: bool,
}

fn ensure_nonempty(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        Err(Error::EmptySample)
    } else {
        Ok(())
    }
}

fn is_constant(values: &[f64]) -> bool {
    values.iter().all(|&v| v == values[0])
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean and population variance (divisor N), two-pass.
fn moments(values: &[f64]) -> (f64, f64) {
    let mu = mean(values);
    let var = values.iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64;
    (mu, var)
}

/// Median; even-length samples average the two central order statistics.
pub fn median(values: &[f64]) -> Result<f64> {
    ensure_nonempty(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Median absolute deviation from the median.
pub fn mad(values: &[f64]) -> Result<f64> {
    let center = median(values)?;
    let deviations: Vec<f64> = values.iter().map(|&v| (v - center).abs()).collect();
    median(&deviations)
}

/// Third standardized moment using the population standard deviation.
///
/// A constant sample has no defined skewness and returns
/// [`Error::DegenerateSample`].
pub fn skewness(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    if is_constant(values) {
        return Err(Error::DegenerateSample);
    }
    let (mu, var) = moments(values);
    let sigma = var.sqrt();
    if sigma == 0.0 {
        return Err(Error::DegenerateSample);
    }
    let n = values.len() as f64;
    Ok(values
        .iter()
        .map(|&v| {
            let z = (v - mu) / sigma;
            z * z * z
        })
        .sum::<f64>()
        / n)
}

/// Modified z-score cut: `3.5 * MAD / 0.6745 + median`.
pub fn outlier_threshold(values: &[f64]) -> Result<f64> {
    let center = median(values)?;
    let spread = mad(values)?;
    Ok(MODIFIED_Z_CUTOFF * spread / MAD_NORMAL_CONSISTENCY + center)
}

/// Fits a Gaussian to the values that survive the modified z-score trim.
///
/// Falls back to the untrimmed sample when fewer than two values survive or
/// the survivors have zero variance; if the whole sample is constant the
/// variance is set to `epsilon²`.
pub fn trimmed_gaussian_fit(values: &[f64], epsilon: f64) -> Result<TrimmedGaussian> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    let threshold = outlier_threshold(values)?;
    let retained: Vec<f64> = values.iter().copied().filter(|&v| v <= threshold).collect();

    if retained.len() >= 2 {
        let (mu, sigma2) = moments(&retained);
        if sigma2 > 0.0 {
            return Ok(TrimmedGaussian {
                mu,
                sigma2,
                threshold,
                retained_count: retained.len(),
                fallback: false,
            });
        }
    }

    let (mu, mut sigma2) = moments(values);
    if sigma2 <= 0.0 {
        sigma2 = epsilon * epsilon;
    }
    Ok(TrimmedGaussian {
        mu,
        sigma2,
        threshold,
        retained_count: values.len(),
        fallback: true,
    })
}

/// Elementwise Gaussian density under `fit`, floored at [`PDF_FLOOR`].
pub fn gaussian_pdf(values: &[f64], fit: &TrimmedGaussian) -> Vec<f64> {
    let norm = 1.0 / (2.0 * PI * fit.sigma2).sqrt();
    let denom = 2.0 * fit.sigma2;
    values
        .iter()
        .map(|&v| {
            let d = v - fit.mu;
            (norm * (-(d * d) / denom).exp()).max(PDF_FLOOR)
        })
        .collect()
}

/// `s - min(s) + epsilon`, applied unconditionally.
pub fn shift_positive(scores: &ScoreBatch, epsilon: f64) -> ScoreBatch {
    let min = scores.values().iter().copied().fold(f64::INFINITY, f64::min);
    ScoreBatch(scores.values().iter().map(|&s| s - min + epsilon).collect())
}

fn ensure_positive(values: &[f64]) -> Result<()> {
    match values.iter().enumerate().find(|(_, &v)| v <= 0.0) {
        Some((index, &value)) => Err(Error::BoxCoxDomain { index, value }),
        None => Ok(()),
    }
}

#[inline]
fn box_cox_from_log(log_s: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        log_s
    } else {
        // expm1 keeps the small-lambda branch continuous with ln(s).
        (lambda * log_s).exp_m1() / lambda
    }
}

/// One-parameter Box-Cox transform. Strictly increasing in `s` for any
/// `lambda`, so ranks are preserved.
pub fn box_cox_transform(scores: &ScoreBatch, lambda: f64) -> Result<Vec<f64>> {
    ensure_positive(scores.values())?;
    Ok(scores
        .values()
        .iter()
        .map(|&s| box_cox_from_log(s.ln(), lambda))
        .collect())
}

/// Profile likelihood evaluated from precomputed logs.
struct ProfileLikelihood {
    log_s: Vec<f64>,
    sum_log: f64,
    scratch: Vec<f64>,
}

impl ProfileLikelihood {
    fn new(scores: &[f64]) -> Self {
        let log_s: Vec<f64> = scores.iter().map(|s| s.ln()).collect();
        let sum_log = log_s.iter().sum();
        let scratch = vec![0.0; log_s.len()];
        ProfileLikelihood {
            log_s,
            sum_log,
            scratch,
        }
    }

    fn eval(&mut self, lambda: f64) -> f64 {
        for (out, &l) in self.scratch.iter_mut().zip(&self.log_s) {
            *out = box_cox_from_log(l, lambda);
        }
        let (_, var) = moments(&self.scratch);
        if !(var > 0.0) || !var.is_finite() {
            return f64::NEG_INFINITY;
        }
        let n = self.log_s.len() as f64;
        -0.5 * n * var.ln() + (lambda - 1.0) * self.sum_log
    }
}

/// Gaussian profile log-likelihood of the Box-Cox-transformed sample:
/// `-(N/2) ln(var_lambda) + (lambda - 1) * sum(ln s)`.
///
/// Returns negative infinity when the transformed sample has no spread.
pub fn box_cox_log_likelihood(scores: &ScoreBatch, lambda: f64) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: scores.len(),
        });
    }
    ensure_positive(scores.values())?;
    Ok(ProfileLikelihood::new(scores.values()).eval(lambda))
}

/// The coarse lambda grid, `-5.0, -4.9, ..., 5.0`.
pub fn lambda_grid() -> impl Iterator<Item = f64> {
    let step = (LAMBDA_MAX - LAMBDA_MIN) / (LAMBDA_GRID_POINTS - 1) as f64;
    (0..LAMBDA_GRID_POINTS).map(move |i| LAMBDA_MIN + step * i as f64)
}

/// Maximum-likelihood Box-Cox exponent on `[-5, 5]`.
///
/// Scans the 101-point grid, then golden-section refines inside the
/// neighbouring grid cells of the best point. The returned fit is never worse
/// than the best grid point.
pub fn fit_box_cox_lambda(scores: &ScoreBatch) -> Result<BoxCoxFit> {
    if scores.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: scores.len(),
        });
    }
    ensure_positive(scores.values())?;
    if is_constant(scores.values()) {
        return Err(Error::DegenerateSample);
    }

    let mut profile = ProfileLikelihood::new(scores.values());
    let grid: Vec<f64> = lambda_grid().collect();
    let mut best = 0;
    let mut best_ll = f64::NEG_INFINITY;
    for (i, &lambda) in grid.iter().enumerate() {
        let ll = profile.eval(lambda);
        if ll > best_ll {
            best = i;
            best_ll = ll;
        }
    }
    if !best_ll.is_finite() {
        return Err(Error::DegenerateSample);
    }

    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (lambda, ll) = golden_section_max(&mut |l| profile.eval(l), lo, hi, LAMBDA_TOLERANCE);

    Ok(if ll >= best_ll {
        BoxCoxFit {
            lambda,
            log_likelihood: ll,
        }
    } else {
        BoxCoxFit {
            lambda: grid[best],
            log_likelihood: best_ll,
        }
    })
}

/// Maximizes a unimodal `f` on `[lo, hi]`; returns the bracket midpoint and
/// its value.
fn golden_section_max(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a >= tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    (mid, f(mid))
}
