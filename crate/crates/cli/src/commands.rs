use std::fmt::Write as _;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use iwl_core::models::{derive_seed, train};
use iwl_core::weights::compute_weights_traced;
use iwl_core::{
    evaluate, generate, load_csv, HostModel, IwlConfig, LabeledDataset, LossMode, Provenance,
    ScoreBatch, SyntheticSpec, TrainConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, ExperimentConfig};
use crate::results::{opt, RunFailure, RunRecord, RunResult, Summary};

const STREAM_DATA: u64 = 11;

/// One sweep cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub beta: Option<f64>,
    pub seed: u64,
    pub loss_mode: LossMode,
}

/// Cells in output order: beta, then seed, then MSE before IWL.
pub fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for beta in config.betas() {
        for &seed in &config.seeds {
            for loss_mode in [LossMode::Mse, LossMode::Iwl] {
                out.push(Cell { beta, seed, loss_mode });
            }
        }
    }
    out
}

/// Synthetic spec for one `(beta, seed)` pair. Each run seed draws its own
/// data; both loss modes of a seed share it.
pub fn cell_spec(spec: &SyntheticSpec, beta: Option<f64>, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        beta: beta.unwrap_or(spec.beta),
        seed: derive_seed(spec.seed, STREAM_DATA, seed),
        ..spec.clone()
    }
}

pub fn load_data(config: &ExperimentConfig, beta: Option<f64>, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    match &config.data {
        DataSource::Synthetic(spec) => Ok(generate(&cell_spec(spec, beta, seed))?),
        DataSource::Csv {
            train,
            test,
            label_column,
        } => {
            let train_set = load_csv(train, label_column.as_deref())?;
            let test_set = load_csv(test, label_column.as_deref())?;
            if train_set.dim() != test_set.dim() {
                bail!(
                    "train has {} feature columns but test has {}",
                    train_set.dim(),
                    test_set.dim()
                );
            }
            Ok((train_set.normal_only(), test_set))
        }
    }
}

/// Trains and evaluates one cell. The model and training shuffles are seeded
/// from the run seed.
pub fn run_cell(
    config: &ExperimentConfig,
    cell: Cell,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
) -> Result<RunRecord> {
    let train_config = TrainConfig {
        loss_mode: cell.loss_mode,
        seed: cell.seed,
        ..config.train.clone()
    };
    let mut model = HostModel::new(config.model.kind, train_set.dim(), &config.model.arch, cell.seed)?;
    let log = train(&mut model, train_set, &train_config)?;
    let train_scores = model.scores(&train_set.features)?;
    let test_scores = model.scores(&test_set.features)?;
    let report = evaluate(test_scores.values(), &test_set.labels, &train_scores)?;
    Ok(RunRecord {
        seed: cell.seed,
        loss_mode: cell.loss_mode,
        beta: cell.beta,
        report,
        epochs: log.epochs,
    })
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

/// Runs every cell in parallel. A failing cell becomes a [`RunFailure`]
/// and does not stop the others.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunResult> {
    config.validate()?;
    let all = cells(config);
    let outcomes: Vec<Result<RunRecord, RunFailure>> = all
        .par_iter()
        .map(|&cell| {
            let attempt = panic::catch_unwind(AssertUnwindSafe(|| {
                let (train_set, test_set) = load_data(config, cell.beta, cell.seed)?;
                run_cell(config, cell, &train_set, &test_set)
            }));
            let error = match attempt {
                Ok(Ok(record)) => return Ok(record),
                Ok(Err(e)) => format!("{e:#}"),
                Err(payload) => format!("panicked: {}", panic_message(payload)),
            };
            Err(RunFailure {
                seed: cell.seed,
                loss_mode: cell.loss_mode,
                beta: cell.beta,
                error,
            })
        })
        .collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => runs.push(r),
            Err(f) => failures.push(f),
        }
    }
    Ok(RunResult::new(config.clone(), runs, failures))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

#[derive(Serialize)]
struct Metadata {
    created_unix_secs: u64,
    tool_version: &'static str,
}

fn write_metadata(dir: &Path) -> Result<()> {
    let meta = Metadata {
        created_unix_secs: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        tool_version: env!("CARGO_PKG_VERSION"),
    };
    write(&dir.join("metadata.json"), &serde_json::to_string_pretty(&meta)?)
}

/// Writes `results.json`, `results.csv`, `epochs.jsonl` and a
/// `metadata.json` holding everything that varies between identical runs.
pub fn write_results(result: &RunResult, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write(&dir.join("results.json"), &serde_json::to_string_pretty(result)?)?;
    write(&dir.join("results.csv"), &result.results_csv())?;
    write(&dir.join("epochs.jsonl"), &result.epochs_jsonl()?)?;
    write_metadata(dir)
}

pub fn cmd_train(config: &ExperimentConfig) -> Result<RunResult> {
    let result = run_experiment(config)?;
    write_results(&result, &config.output_dir)?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub rows: usize,
    pub majority: usize,
    pub minority: usize,
    pub anomaly: usize,
}

impl DatasetCounts {
    fn of(data: &LabeledDataset) -> Self {
        DatasetCounts {
            rows: data.len(),
            majority: data.count(Provenance::Majority),
            minority: data.count(Provenance::Minority),
            anomaly: data.count(Provenance::Anomaly),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: SyntheticSpec,
    pub run_seed: u64,
    pub train_file: String,
    pub test_file: String,
    pub train: DatasetCounts,
    pub test: DatasetCounts,
}

/// Writes `train.csv`, `test.csv` and `manifest.json` under
/// `output_dir/beta_<b>/seed_<s>/` for every beta and seed. Returns the
/// manifest paths.
pub fn cmd_generate(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let DataSource::Synthetic(base) = &config.data else {
        bail!("generate needs a synthetic data source");
    };
    let mut manifests = Vec::new();
    for beta in config.betas() {
        for &seed in &config.seeds {
            let spec = cell_spec(base, beta, seed);
            let (train_set, test_set) = generate(&spec)?;
            let dir = config
                .output_dir
                .join(format!("beta_{}", spec.beta))
                .join(format!("seed_{seed}"));
            create_dir(&dir)?;
            train_set.write_csv(&dir.join("train.csv"))?;
            test_set.write_csv(&dir.join("test.csv"))?;
            let manifest = Manifest {
                spec,
                run_seed: seed,
                train_file: "train.csv".into(),
                test_file: "test.csv".into(),
                train: DatasetCounts::of(&train_set),
                test: DatasetCounts::of(&test_set),
            };
            let path = dir.join("manifest.json");
            write(&path, &serde_json::to_string_pretty(&manifest)?)?;
            manifests.push(path);
        }
    }
    Ok(manifests)
}

/// Summary of a `weights` invocation, also written as the output's comment line.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightsSummary {
    pub weights: Vec<f64>,
    pub lambda: Option<f64>,
    pub skewness: Option<f64>,
    pub cap: f64,
}

/// Reads one numeric column. A non-numeric first line is taken as a header;
/// blank lines are skipped.
pub fn read_score_column(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let cell = line.trim();
        if cell.is_empty() {
            continue;
        }
        if cell.contains(',') {
            bail!("{}:{line_no}: expected one column, found {:?}", path.display(), cell);
        }
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => bail!("{}:{line_no}: non-finite value {v}", path.display()),
            Err(_) if values.is_empty() && line_no == 1 => {}
            Err(_) => bail!("{}:{line_no}: cannot parse {:?} as a number", path.display(), cell),
        }
    }
    if values.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(values)
}

pub fn cmd_weights(input: &Path, output: &Path, config: &IwlConfig) -> Result<WeightsSummary> {
    let values = read_score_column(input)?;
    let batch = ScoreBatch::new(values).with_context(|| format!("scores in {}", input.display()))?;
    let (w, trace) = compute_weights_traced(&batch, config)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# lambda={},skewness={},cap={}",
        opt(trace.lambda),
        opt(trace.skewness),
        w.cap
    );
    out.push_str("weight\n");
    for v in &w.weights {
        let _ = writeln!(out, "{v}");
    }
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write(output, &out)?;
    Ok(WeightsSummary {
        weights: w.weights,
        lambda: trace.lambda,
        skewness: trace.skewness,
        cap: w.cap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub beta: Option<f64>,
    pub loss_mode: LossMode,
    pub n: usize,
    pub auroc: Summary,
    pub aupr: Summary,
    pub log_score_skew: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub beta: Option<f64>,
    pub auroc: f64,
    pub aupr: f64,
    pub log_score_skew: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    /// IWL minus MSE per beta, where both modes are present.
    pub deltas: Vec<DeltaRow>,
    pub n_failures: usize,
}

impl Report {
    pub fn text(&self) -> String {
        let fmt = |s: &Summary| format!("{:.4} ± {:.4}", s.mean, s.std);
        let beta = |b: Option<f64>| b.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>8}  {:>4}  {:>3}  {:>17}  {:>17}  {:>17}",
            "beta", "mode", "n", "auroc", "aupr", "log_score_skew"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>8}  {:>4}  {:>3}  {:>17}  {:>17}  {:>17}",
                beta(r.beta),
                r.loss_mode.to_string(),
                r.n,
                fmt(&r.auroc),
                fmt(&r.aupr),
                r.log_score_skew.as_ref().map(fmt).unwrap_or_else(|| "-".into()),
            );
        }
        if !self.deltas.is_empty() {
            out.push_str("\nIWL - MSE\n");
            for d in &self.deltas {
                let _ = writeln!(
                    out,
                    "{:>8}  auroc {:+.4}  aupr {:+.4}  log_score_skew {}",
                    beta(d.beta),
                    d.auroc,
                    d.aupr,
                    d.log_score_skew.map(|v| format!("{v:+.4}")).unwrap_or_else(|| "-".into()),
                );
            }
        }
        if self.n_failures > 0 {
            let _ = writeln!(out, "\n{} failed run(s)", self.n_failures);
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(
            "beta,loss_mode,n,auroc_mean,auroc_std,aupr_mean,aupr_std,log_score_skew_mean,log_score_skew_std\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                opt(r.beta),
                r.loss_mode,
                r.n,
                r.auroc.mean,
                r.auroc.std,
                r.aupr.mean,
                r.aupr.std,
                opt(r.log_score_skew.map(|s| s.mean)),
                opt(r.log_score_skew.map(|s| s.std)),
            );
        }
        for d in &self.deltas {
            let _ = writeln!(
                out,
                "{},iwl-mse,,{},,{},,{},",
                opt(d.beta),
                d.auroc,
                d.aupr,
                opt(d.log_score_skew)
            );
        }
        out
    }
}

/// Pools the runs of every file and summarizes them per beta and mode.
pub fn build_report(results: &[RunResult]) -> Report {
    let runs: Vec<RunRecord> = results.iter().flat_map(|r| r.runs.iter().cloned()).collect();
    let pooled = crate::results::aggregate(&runs);
    let rows: Vec<ReportRow> = pooled
        .iter()
        .map(|a| ReportRow {
            beta: a.beta,
            loss_mode: a.loss_mode,
            n: a.n,
            auroc: a.auroc,
            aupr: a.aupr,
            log_score_skew: a.log_score_skew,
        })
        .collect();
    let mut deltas = Vec::new();
    for mse in rows.iter().filter(|r| r.loss_mode == LossMode::Mse) {
        let Some(iwl) = rows
            .iter()
            .find(|r| r.loss_mode == LossMode::Iwl && r.beta.map(f64::to_bits) == mse.beta.map(f64::to_bits))
        else {
            continue;
        };
        deltas.push(DeltaRow {
            beta: mse.beta,
            auroc: iwl.auroc.mean - mse.auroc.mean,
            aupr: iwl.aupr.mean - mse.aupr.mean,
            log_score_skew: match (iwl.log_score_skew, mse.log_score_skew) {
                (Some(a), Some(b)) => Some(a.mean - b.mean),
                _ => None,
            },
        });
    }
    Report {
        rows,
        deltas,
        n_failures: results.iter().map(|r| r.failures.len()).sum(),
    }
}

/// Loads result files, writes `report.csv` into `out_dir` when given, and
/// returns the report.
pub fn cmd_report(files: &[PathBuf], out_dir: Option<&Path>) -> Result<Report> {
    if files.is_empty() {
        bail!("report needs at least one results file");
    }
    let results = files
        .iter()
        .map(|f| RunResult::load(f))
        .collect::<Result<Vec<_>>>()?;
    let report = build_report(&results);
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        write(&dir.join("report.csv"), &report.csv())?;
    }
    Ok(report)
}
