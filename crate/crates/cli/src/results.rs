//! Result files: `results.json` (full record), `results.csv` (one row per
//! run, fixed column order) and `epochs.jsonl` (one record per epoch).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use iwl_core::models::EpochLog;
use iwl_core::{EvalReport, LossMode};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Column order of `results.csv`.
pub const RESULTS_CSV_HEADER: &str = "seed,loss_mode,beta,auroc,aupr,score_skew,log_score_skew";

const AGGREGATE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub loss_mode: LossMode,
    pub beta: Option<f64>,
    pub report: EvalReport,
    pub epochs: Vec<EpochLog>,
}

/// A sweep cell that failed; siblings still run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub seed: u64,
    pub loss_mode: LossMode,
    pub beta: Option<f64>,
    pub error: String,
}

/// Mean and sample standard deviation of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Summary { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub beta: Option<f64>,
    pub loss_mode: LossMode,
    pub n: usize,
    pub auroc: Summary,
    pub aupr: Summary,
    pub score_skew: Option<Summary>,
    pub log_score_skew: Option<Summary>,
}

fn same_beta(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x == y,
        (None, None) => true,
        _ => false,
    }
}

/// Groups runs by `(beta, loss_mode)` in first-appearance order of beta,
/// MSE before IWL.
pub fn aggregate(runs: &[RunRecord]) -> Vec<Aggregate> {
    let mut betas: Vec<Option<f64>> = Vec::new();
    for r in runs {
        if !betas.iter().any(|&b| same_beta(b, r.beta)) {
            betas.push(r.beta);
        }
    }
    let mut out = Vec::new();
    for beta in betas {
        for mode in [LossMode::Mse, LossMode::Iwl] {
            let group: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.loss_mode == mode && same_beta(r.beta, beta))
                .collect();
            if group.is_empty() {
                continue;
            }
            let collect = |f: &dyn Fn(&EvalReport) -> Option<f64>| -> Vec<f64> {
                group.iter().filter_map(|r| f(&r.report)).collect()
            };
            out.push(Aggregate {
                beta,
                loss_mode: mode,
                n: group.len(),
                auroc: Summary::of(&collect(&|r| Some(r.auroc))).expect("nonempty group"),
                aupr: Summary::of(&collect(&|r| Some(r.aupr))).expect("nonempty group"),
                score_skew: Summary::of(&collect(&|r| r.score_skewness)),
                log_score_skew: Summary::of(&collect(&|r| r.log_score_skewness)),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub aggregates: Vec<Aggregate>,
}

impl RunResult {
    pub fn new(config: ExperimentConfig, runs: Vec<RunRecord>, failures: Vec<RunFailure>) -> Self {
        let aggregates = aggregate(&runs);
        RunResult {
            schema_version: SCHEMA_VERSION,
            config,
            runs,
            failures,
            aggregates,
        }
    }

    pub fn aggregate_for(&self, beta: Option<f64>, mode: LossMode) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.loss_mode == mode && same_beta(a.beta, beta))
    }

    /// Loads a `results.json`, rejecting other schema versions and stored
    /// aggregates that disagree with the per-run entries.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let raw: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let version = raw.get("schema_version").and_then(|v| v.as_u64());
        if version != Some(u64::from(SCHEMA_VERSION)) {
            bail!(
                "{}: schema_version {:?} does not match supported version {}",
                path.display(),
                version,
                SCHEMA_VERSION
            );
        }
        let result: RunResult =
            serde_json::from_value(raw).with_context(|| format!("decoding {}", path.display()))?;
        result
            .check_aggregates()
            .with_context(|| format!("{}: stored aggregates are inconsistent", path.display()))?;
        Ok(result)
    }

    pub fn check_aggregates(&self) -> Result<()> {
        let fresh = aggregate(&self.runs);
        if fresh.len() != self.aggregates.len() {
            bail!("expected {} aggregate rows, found {}", fresh.len(), self.aggregates.len());
        }
        let close = |a: f64, b: f64| (a - b).abs() <= AGGREGATE_TOLERANCE * a.abs().max(1.0);
        let close_s = |a: &Summary, b: &Summary| close(a.mean, b.mean) && close(a.std, b.std);
        let close_o = |a: &Option<Summary>, b: &Option<Summary>| match (a, b) {
            (Some(x), Some(y)) => close_s(x, y),
            (None, None) => true,
            _ => false,
        };
        for (f, s) in fresh.iter().zip(&self.aggregates) {
            let ok = same_beta(f.beta, s.beta)
                && f.loss_mode == s.loss_mode
                && f.n == s.n
                && close_s(&f.auroc, &s.auroc)
                && close_s(&f.aupr, &s.aupr)
                && close_o(&f.score_skew, &s.score_skew)
                && close_o(&f.log_score_skew, &s.log_score_skew);
            if !ok {
                bail!("aggregate for beta {:?} / {} does not match runs", s.beta, s.loss_mode);
            }
        }
        Ok(())
    }

    pub fn results_csv(&self) -> String {
        let mut out = String::from(RESULTS_CSV_HEADER);
        out.push('\n');
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.seed,
                r.loss_mode,
                opt(r.beta),
                r.report.auroc,
                r.report.aupr,
                opt(r.report.score_skewness),
                opt(r.report.log_score_skewness),
            );
        }
        out
    }

    pub fn epochs_jsonl(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Line<'a> {
            seed: u64,
            loss_mode: LossMode,
            beta: Option<f64>,
            #[serde(flatten)]
            epoch: &'a EpochLog,
        }
        let mut out = String::new();
        for r in &self.runs {
            for e in &r.epochs {
                out.push_str(&serde_json::to_string(&Line {
                    seed: r.seed,
                    loss_mode: r.loss_mode,
                    beta: r.beta,
                    epoch: e,
                })?);
                out.push('\n');
            }
        }
        Ok(out)
    }
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
