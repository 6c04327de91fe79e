use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use iwl_core::{ArchConfig, ModelKind, SyntheticSpec, TrainConfig};
use serde::{Deserialize, Serialize};

/// Where the training and test rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv {
        train: PathBuf,
        test: PathBuf,
        #[serde(default = "default_label_column")]
        label_column: Option<String>,
    },
}

fn default_label_column() -> Option<String> {
    Some("label".to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(flatten)]
    pub arch: ArchConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Dsvdd,
            arch: ArchConfig::default(),
        }
    }
}

/// Everything a `train` or `generate` invocation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    /// Overrides `data.beta`; each value is its own sweep cell.
    #[serde(default)]
    pub beta_sweep: Option<Vec<f64>>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::Synthetic(SyntheticSpec::default()),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            seeds: vec![1, 2, 3],
            beta_sweep: None,
            output_dir: PathBuf::from("runs"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(config)
    }

    /// `--seed` replaces the seed list, `--out` the output directory.
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.seeds = vec![s];
        }
        if let Some(o) = out {
            self.output_dir = o;
        }
        self
    }

    /// The beta values to run; `None` for CSV data, which has no beta.
    pub fn betas(&self) -> Vec<Option<f64>> {
        match (&self.data, &self.beta_sweep) {
            (DataSource::Synthetic(_), Some(sweep)) => sweep.iter().map(|&b| Some(b)).collect(),
            (DataSource::Synthetic(spec), None) => vec![Some(spec.beta)],
            (DataSource::Csv { .. }, _) => vec![None],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("seeds must not be empty");
        }
        let distinct: HashSet<_> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            bail!("seeds must be distinct");
        }
        self.train.validate()?;
        self.model.arch.validate()?;
        match &self.data {
            DataSource::Synthetic(spec) => {
                if let Some(sweep) = &self.beta_sweep {
                    if sweep.is_empty() {
                        bail!("beta_sweep must not be empty when given");
                    }
                    for &b in sweep {
                        if !(b >= 1.0) {
                            bail!("beta values must be >= 1, got {b}");
                        }
                        SyntheticSpec { beta: b, ..spec.clone() }.validate()?;
                    }
                } else {
                    spec.validate()?;
                }
            }
            DataSource::Csv { .. } => {
                if self.beta_sweep.is_some() {
                    bail!("beta_sweep only applies to synthetic data");
                }
            }
        }
        Ok(())
    }
}
