//! Detection metrics and score-distribution diagnostics. Anomalies are the
//! positive class throughout.

use serde::{Deserialize, Serialize};

use crate::datagen::Label;
use crate::error::{Error, Result};
use crate::stats::{skewness, ScoreBatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auroc: f64,
    pub aupr: f64,
    /// Skewness of the training-set anomaly scores.
    pub score_skewness: Option<f64>,
    /// Skewness of the log training-set anomaly scores.
    pub log_score_skewness: Option<f64>,
    pub n_normal: usize,
    pub n_anomaly: usize,
}

fn check_inputs(scores: &[f64], labels: &[Label]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if let Some((index, &value)) = scores.iter().enumerate().find(|(_, v)| v.is_nan()) {
        return Err(Error::NonFinite { index, value });
    }
    let n_pos = labels.iter().filter(|l| l.is_anomaly()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((n_pos, n_neg))
}

fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Area under the ROC curve via the Mann-Whitney statistic with midranks.
pub fn auroc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let (n_pos, n_neg) = check_inputs(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        // ranks are 1-based: start+1 ..= end
        let midrank = 0.5 * ((start + 1) + end) as f64;
        let positives = idx[start..end].iter().filter(|&&i| labels[i].is_anomaly()).count();
        positive_rank_sum += midrank * positives as f64;
        start = end;
    }
    let n_pos_f = n_pos as f64;
    let u = positive_rank_sum - n_pos_f * (n_pos_f + 1.0) / 2.0;
    Ok(u / (n_pos_f * n_neg as f64))
}

/// Average precision: precision at each distinct threshold, weighted by the
/// recall it adds. Tied scores form a single threshold.
pub fn aupr(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let (n_pos, _) = check_inputs(scores, labels)?;
    let idx = descending_order(scores);
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut ap = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        let positives = idx[start..end].iter().filter(|&&i| labels[i].is_anomaly()).count();
        tp += positives;
        seen += end - start;
        if positives > 0 {
            ap += (positives as f64 / n_pos as f64) * (tp as f64 / seen as f64);
        }
        start = end;
    }
    Ok(ap)
}

/// Skewness of `ln(scores)`. Scores must already be positive.
pub fn log_score_skewness(scores: &ScoreBatch) -> Result<f64> {
    if let Some((index, &value)) = scores.values().iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::BoxCoxDomain { index, value });
    }
    let logs: Vec<f64> = scores.values().iter().map(|s| s.ln()).collect();
    skewness(&logs)
}

/// Builds an [`EvalReport`] from test-set scores and training-set scores.
///
/// The skewness fields are `None` when the training scores are degenerate.
pub fn evaluate(test_scores: &[f64], test_labels: &[Label], train_scores: &ScoreBatch) -> Result<EvalReport> {
    let (n_anomaly, n_normal) = check_inputs(test_scores, test_labels)?;
    Ok(EvalReport {
        auroc: auroc(test_scores, test_labels)?,
        aupr: aupr(test_scores, test_labels)?,
        score_skewness: skewness(train_scores.values()).ok(),
        log_score_skewness: log_score_skewness(train_scores).ok(),
        n_normal,
        n_anomaly,
    })
}
