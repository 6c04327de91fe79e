//! Synthetic two-cluster datasets with a controlled imbalance ratio, and CSV
//! ingestion for external data.
//!
//! The normal class is a mixture of a majority and a minority Gaussian
//! cluster; the minority holds `floor(n_majority / beta)` points. Anomalies
//! are drawn uniformly from a box with balls around both cluster means cut
//! out.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Anomaly draws within this many `cluster_std` of a cluster mean are
/// rejected.
pub const EXCLUSION_RADIUS_STDS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomaly,
}

impl Label {
    pub fn is_anomaly(self) -> bool {
        self == Label::Anomaly
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Majority,
    Minority,
    Anomaly,
}

impl Provenance {
    pub fn label(self) -> Label {
        match self {
            Provenance::Anomaly => Label::Anomaly,
            _ => Label::Normal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub n_majority: usize,
    /// Imbalance ratio `n_majority / n_minority`.
    pub beta: f64,
    pub majority_mean: Vec<f64>,
    pub minority_mean: Vec<f64>,
    pub cluster_std: f64,
    /// Fresh normal test draws per cluster (the test set is balanced between
    /// the two clusters).
    pub n_test_per_cluster: usize,
    pub n_anomaly_eval: usize,
    /// Per-dimension `[low, high]` range for anomaly draws.
    pub anomaly_box: Vec<[f64; 2]>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec::two_cluster(8, 2000, 100.0, 0)
    }
}

impl SyntheticSpec {
    /// Clusters at `-3` and `+3` along the first axis, unit spread, anomalies
    /// in `[-10, 10]^dim`.
    pub fn two_cluster(dim: usize, n_majority: usize, beta: f64, seed: u64) -> Self {
        let cluster_std = 1.0;
        let mut majority_mean = vec![0.0; dim];
        let mut minority_mean = vec![0.0; dim];
        if dim > 0 {
            majority_mean[0] = -3.0 * cluster_std;
            minority_mean[0] = 3.0 * cluster_std;
        }
        SyntheticSpec {
            dim,
            n_majority,
            beta,
            majority_mean,
            minority_mean,
            cluster_std,
            n_test_per_cluster: 1000,
            n_anomaly_eval: 1000,
            anomaly_box: vec![[-10.0, 10.0]; dim],
            seed,
        }
    }

    pub fn n_minority(&self) -> usize {
        (self.n_majority as f64 / self.beta).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if !(self.beta >= 1.0) || !self.beta.is_finite() {
            return bad(format!("beta must be >= 1, got {}", self.beta));
        }
        if self.n_minority() < 1 {
            return bad(format!(
                "floor(n_majority / beta) = floor({} / {}) leaves no minority samples",
                self.n_majority, self.beta
            ));
        }
        if self.majority_mean.len() != self.dim || self.minority_mean.len() != self.dim {
            return bad("cluster means must have length dim".into());
        }
        if self.majority_mean == self.minority_mean {
            return bad("cluster means must be distinct".into());
        }
        if !(self.cluster_std > 0.0) || !self.cluster_std.is_finite() {
            return bad("cluster_std must be positive".into());
        }
        if self.anomaly_box.len() != self.dim {
            return bad("anomaly_box must have one range per dimension".into());
        }
        if self.anomaly_box.iter().any(|[lo, hi]| !(lo < hi)) {
            return bad("anomaly_box ranges must satisfy low < high".into());
        }
        Ok(())
    }
}

/// Feature rows with binary labels and cluster provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub labels: Vec<Label>,
    pub provenance: Vec<Provenance>,
}

impl LabeledDataset {
    pub fn from_provenance(features: Matrix, provenance: Vec<Provenance>) -> Result<Self> {
        if features.rows() != provenance.len() {
            return Err(Error::LengthMismatch {
                expected: features.rows(),
                got: provenance.len(),
            });
        }
        let labels = provenance.iter().map(|p| p.label()).collect();
        Ok(LabeledDataset {
            features,
            labels,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.provenance.iter().filter(|&&p| p == provenance).count()
    }

    pub fn n_anomaly(&self) -> usize {
        self.labels.iter().filter(|l| l.is_anomaly()).count()
    }

    pub fn n_normal(&self) -> usize {
        self.len() - self.n_anomaly()
    }

    /// The subset of rows labeled normal.
    pub fn normal_only(&self) -> LabeledDataset {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| !self.labels[i].is_anomaly()).collect();
        LabeledDataset {
            features: self.features.select_rows(&keep),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            provenance: keep.iter().map(|&i| self.provenance[i]).collect(),
        }
    }

    /// Writes `x0,...,x{d-1},label` with shortest round-trip decimals.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        let header: Vec<String> = (0..self.dim()).map(|j| format!("x{j}")).collect();
        writeln!(out, "{},label", header.join(",")).map_err(io)?;
        for (row, label) in self.features.iter_rows().zip(&self.labels) {
            for v in row {
                write!(out, "{v},").map_err(io)?;
            }
            writeln!(out, "{}", u8::from(label.is_anomaly())).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

fn gaussian_rows(
    rng: &mut ChaCha8Rng,
    n: usize,
    mean: &[f64],
    std: f64,
    out: &mut Vec<f64>,
) {
    for _ in 0..n {
        for &m in mean {
            let z: f64 = rng.sample(StandardNormal);
            out.push(m + std * z);
        }
    }
}

fn anomaly_rows(rng: &mut ChaCha8Rng, spec: &SyntheticSpec, out: &mut Vec<f64>) -> Result<()> {
    let radius2 = (EXCLUSION_RADIUS_STDS * spec.cluster_std).powi(2);
    let max_attempts = 1000 * spec.n_anomaly_eval.max(1);
    let mut attempts = 0;
    let mut accepted = 0;
    let mut row = vec![0.0; spec.dim];
    while accepted < spec.n_anomaly_eval {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::InvalidSpec(
                "anomaly_box is almost entirely inside the cluster exclusion balls".into(),
            ));
        }
        for (v, [lo, hi]) in row.iter_mut().zip(&spec.anomaly_box) {
            *v = rng.random_range(*lo..*hi);
        }
        let near = [&spec.majority_mean, &spec.minority_mean].iter().any(|mean| {
            row.iter().zip(mean.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < radius2
        });
        if !near {
            out.extend_from_slice(&row);
            accepted += 1;
        }
    }
    Ok(())
}

/// Draws a normals-only training set and a test set with normals from both
/// clusters plus uniform anomalies. Deterministic in `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_minority = spec.n_minority();

    let mut train = Vec::with_capacity((spec.n_majority + n_minority) * spec.dim);
    gaussian_rows(&mut rng, spec.n_majority, &spec.majority_mean, spec.cluster_std, &mut train);
    gaussian_rows(&mut rng, n_minority, &spec.minority_mean, spec.cluster_std, &mut train);
    let mut train_prov = vec![Provenance::Majority; spec.n_majority];
    train_prov.extend(std::iter::repeat_n(Provenance::Minority, n_minority));

    let k = spec.n_test_per_cluster;
    let mut test = Vec::with_capacity((2 * k + spec.n_anomaly_eval) * spec.dim);
    gaussian_rows(&mut rng, k, &spec.majority_mean, spec.cluster_std, &mut test);
    gaussian_rows(&mut rng, k, &spec.minority_mean, spec.cluster_std, &mut test);
    anomaly_rows(&mut rng, spec, &mut test)?;
    let mut test_prov = vec![Provenance::Majority; k];
    test_prov.extend(std::iter::repeat_n(Provenance::Minority, k));
    test_prov.extend(std::iter::repeat_n(Provenance::Anomaly, spec.n_anomaly_eval));

    let train = LabeledDataset::from_provenance(
        Matrix::from_vec(train_prov.len(), spec.dim, train)?,
        train_prov,
    )?;
    let test = LabeledDataset::from_provenance(
        Matrix::from_vec(test_prov.len(), spec.dim, test)?,
        test_prov,
    )?;
    Ok((train, test))
}

/// Reads a comma-separated file with a header line.
///
/// Every column except `label_column` is a numeric feature. Label values must
/// be `0` (normal) or `1` (anomaly); without a label column all rows are
/// normal. CSV rows carry no sub-cluster information, so normal rows are
/// tagged [`Provenance::Majority`].
pub fn load_csv(path: &Path, label_column: Option<&str>) -> Result<LabeledDataset> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(1, format!("{other:?}")),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let label_idx = match label_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| parse_err(1, format!("label column `{name}` not in header")))?,
        ),
        None => None,
    };
    let width = headers.len();
    let n_features = width - usize::from(label_idx.is_some());
    if n_features == 0 {
        return Err(parse_err(1, "no feature columns".into()));
    }

    let mut data = Vec::new();
    let mut provenance = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let mut prov = Provenance::Majority;
        for (j, cell) in record.iter().enumerate() {
            if Some(j) == label_idx {
                prov = match cell {
                    "0" => Provenance::Majority,
                    "1" => Provenance::Anomaly,
                    other => {
                        return Err(parse_err(
                            line,
                            format!("label must be 0 or 1, found `{other}`"),
                        ))
                    }
                };
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    parse_err(line, format!("column `{}`: `{cell}` is not a number", &headers[j]))
                })?;
                data.push(v);
            }
        }
        provenance.push(prov);
    }
    if provenance.is_empty() {
        return Err(Error::NoDataRows {
            path: path.to_path_buf(),
        });
    }
    let features = Matrix::from_vec(provenance.len(), n_features, data)?;
    LabeledDataset::from_provenance(features, provenance)
}
