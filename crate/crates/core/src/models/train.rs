use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    ae_scores, derive_seed, dsvdd_init_center, dsvdd_scores, ArchConfig, Autoencoder, DsvddModel,
    LossMode, ModelKind, TrainConfig,
};
use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamState, Matrix, Mode};
use crate::stats::{skewness, ScoreBatch};
use crate::weights::{compute_weights_traced, weighted_loss, IwlConfig, WeightVector};

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_PRETRAIN_SHUFFLE: u64 = 3;
const STREAM_DECODER_INIT: u64 = 4;

/// Source of per-sample loss weights for one mini-batch.
pub trait BatchWeighting {
    /// Returns the weights and, when defined, the batch skewness that drove
    /// the cap.
    fn weights(&self, scores: &ScoreBatch) -> Result<(WeightVector, Option<f64>)>;
}

/// Plain mean-squared training: every weight is 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitWeights;

impl BatchWeighting for UnitWeights {
    fn weights(&self, scores: &ScoreBatch) -> Result<(WeightVector, Option<f64>)> {
        Ok((WeightVector::ones(scores.len()), None))
    }
}

/// Importance weights recomputed from scratch for every batch.
#[derive(Debug, Clone, Copy)]
pub struct ImportanceWeights(pub IwlConfig);

impl BatchWeighting for ImportanceWeights {
    fn weights(&self, scores: &ScoreBatch) -> Result<(WeightVector, Option<f64>)> {
        let (w, trace) = compute_weights_traced(scores, &self.0)?;
        Ok((w, trace.skewness))
    }
}

fn weighting_for(config: &TrainConfig) -> Box<dyn BatchWeighting> {
    match config.loss_mode {
        LossMode::Mse => Box::new(UnitWeights),
        LossMode::Iwl => Box::new(ImportanceWeights(config.iwl)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Autoencoder pretraining of a DSVDD encoder.
    Pretrain,
    Main,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchLog {
    pub phase: Phase,
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
    pub skewness: Option<f64>,
    pub cap: f64,
    pub max_weight: f64,
    pub mean_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub phase: Phase,
    pub epoch: usize,
    pub mean_loss: f64,
    /// Skewness of all train-mode scores seen during the epoch.
    pub score_skewness: Option<f64>,
    pub mean_weight: f64,
    pub max_weight: f64,
    pub batches: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub batches: Vec<BatchLog>,
}

impl TrainLog {
    pub fn main_epochs(&self) -> impl Iterator<Item = &EpochLog> {
        self.epochs.iter().filter(|e| e.phase == Phase::Main)
    }
}

struct StepOutcome {
    scores: Vec<f64>,
    loss: f64,
    weights: WeightVector,
    skewness: Option<f64>,
}

/// `d(loss)/d(output)` for `loss = (1/N) sum_i w_i ||output_i - target_i||^2`.
fn weighted_sq_grad(output: &Matrix, target_rows: impl Fn(usize) -> Vec<f64>, w: &[f64]) -> Matrix {
    let n = output.rows() as f64;
    let mut grad = Matrix::zeros(output.rows(), output.cols());
    for r in 0..output.rows() {
        let scale = 2.0 * w[r] / n;
        let target = target_rows(r);
        for ((g, y), t) in grad.row_mut(r).iter_mut().zip(output.row(r)).zip(&target) {
            *g = scale * (y - t);
        }
    }
    grad
}

fn ae_step(
    model: &mut Autoencoder,
    enc_opt: &mut AdamState,
    dec_opt: &mut AdamState,
    x: &Matrix,
    weighting: &dyn BatchWeighting,
) -> Result<StepOutcome> {
    let (z, enc_tape) = model.encoder.forward(x, Mode::Train)?;
    let (y, dec_tape) = model.decoder.forward(&z, Mode::Train)?;
    let scores = ScoreBatch::new(y.row_sq_dist(x)?)?;
    let (weights, skew) = weighting.weights(&scores)?;
    let loss = weighted_loss(scores.values(), &weights)?;

    let dy = weighted_sq_grad(&y, |r| x.row(r).to_vec(), &weights.weights);
    let (dec_grads, dz) = model.decoder.backward(&dec_tape, &dy)?;
    let (enc_grads, _) = model.encoder.backward(&enc_tape, &dz)?;
    adam_step(&mut model.decoder, dec_opt, &dec_grads)?;
    adam_step(&mut model.encoder, enc_opt, &enc_grads)?;

    Ok(StepOutcome {
        scores: scores.into_inner(),
        loss,
        weights,
        skewness: skew,
    })
}

fn dsvdd_step(
    model: &mut DsvddModel,
    opt: &mut AdamState,
    center: &[f64],
    x: &Matrix,
    weighting: &dyn BatchWeighting,
) -> Result<StepOutcome> {
    let (z, tape) = model.encoder.forward(x, Mode::Train)?;
    let scores = ScoreBatch::new(
        z.iter_rows()
            .map(|r| r.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum())
            .collect(),
    )?;
    let (weights, skew) = weighting.weights(&scores)?;
    let loss = weighted_loss(scores.values(), &weights)?;

    let dz = weighted_sq_grad(&z, |_| center.to_vec(), &weights.weights);
    let (grads, _) = model.encoder.backward(&tape, &dz)?;
    adam_step(&mut model.encoder, opt, &grads)?;

    Ok(StepOutcome {
        scores: scores.into_inner(),
        loss,
        weights,
        skewness: skew,
    })
}

/// Seeded permutation split into batches; a final batch of fewer than two
/// rows is dropped.
fn epoch_batches(n: usize, batch_size: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
        .chunks(batch_size)
        .filter(|c| c.len() >= 2)
        .map(<[usize]>::to_vec)
        .collect()
}

fn run_epochs(
    features: &Matrix,
    config: &TrainConfig,
    phase: Phase,
    epochs: usize,
    shuffle_stream: u64,
    log: &mut TrainLog,
    mut step: impl FnMut(&Matrix) -> Result<StepOutcome>,
) -> Result<()> {
    for epoch in 0..epochs {
        let batches = epoch_batches(
            features.rows(),
            config.batch_size,
            derive_seed(config.seed, shuffle_stream, epoch as u64),
        );
        if batches.is_empty() {
            return Err(Error::InvalidConfig(
                "training data has fewer than two rows".into(),
            ));
        }
        let mut epoch_scores = Vec::with_capacity(features.rows());
        let mut loss_sum = 0.0;
        let mut weight_sum = 0.0;
        let mut weight_count = 0usize;
        let mut weight_max = f64::NEG_INFINITY;
        for (b, idx) in batches.iter().enumerate() {
            let x = features.select_rows(idx);
            let out = step(&x)?;
            let max_w = out.weights.max();
            log.batches.push(BatchLog {
                phase,
                epoch,
                batch: b,
                loss: out.loss,
                skewness: out.skewness,
                cap: out.weights.cap,
                max_weight: max_w,
                mean_weight: out.weights.mean(),
            });
            loss_sum += out.loss;
            weight_sum += out.weights.weights.iter().sum::<f64>();
            weight_count += out.weights.len();
            weight_max = weight_max.max(max_w);
            epoch_scores.extend(out.scores);
        }
        log.epochs.push(EpochLog {
            phase,
            epoch,
            mean_loss: loss_sum / batches.len() as f64,
            score_skewness: skewness(&epoch_scores).ok(),
            mean_weight: weight_sum / weight_count as f64,
            max_weight: weight_max,
            batches: batches.len(),
        });
    }
    Ok(())
}

fn training_rows(data: &LabeledDataset, input_dim: usize) -> Result<Matrix> {
    let normals = data.normal_only();
    if normals.is_empty() {
        return Err(Error::EmptySample);
    }
    if normals.dim() != input_dim {
        return Err(Error::DimensionMismatch {
            expected: input_dim,
            got: normals.dim(),
        });
    }
    Ok(normals.features)
}

/// Trains an autoencoder on the normal rows of `data` with the loss mode in
/// `config`.
pub fn train_autoencoder(
    model: &mut Autoencoder,
    data: &LabeledDataset,
    config: &TrainConfig,
) -> Result<TrainLog> {
    train_autoencoder_with(model, data, config, weighting_for(config).as_ref())
}

/// [`train_autoencoder`] with an explicit weight source.
pub fn train_autoencoder_with(
    model: &mut Autoencoder,
    data: &LabeledDataset,
    config: &TrainConfig,
    weighting: &dyn BatchWeighting,
) -> Result<TrainLog> {
    config.validate()?;
    let features = training_rows(data, model.input_dim())?;
    let mut log = TrainLog::default();
    let mut enc_opt = AdamState::new(&model.encoder, config.learning_rate, config.weight_decay);
    let mut dec_opt = AdamState::new(&model.decoder, config.learning_rate, config.weight_decay);
    run_epochs(
        &features,
        config,
        Phase::Main,
        config.epochs,
        STREAM_SHUFFLE,
        &mut log,
        |x| ae_step(model, &mut enc_opt, &mut dec_opt, x, weighting),
    )?;
    Ok(log)
}

/// Pretrains the encoder as half of an autoencoder (unit weights), fixes the
/// center, then trains on squared distance to the center.
pub fn train_dsvdd(model: &mut DsvddModel, data: &LabeledDataset, config: &TrainConfig) -> Result<TrainLog> {
    let arch = infer_arch(model);
    train_dsvdd_with(model, data, config, &arch, weighting_for(config).as_ref())
}

/// Decoder layout for pretraining, mirrored from the encoder's dense widths.
fn infer_arch(model: &DsvddModel) -> ArchConfig {
    use crate::nn::LayerSpec;
    let mut widths = Vec::new();
    let mut slope = crate::nn::DEFAULT_LEAKY_SLOPE;
    for layer in model.encoder.layers() {
        match layer.spec() {
            LayerSpec::Dense { output, .. } => widths.push(output),
            LayerSpec::LeakyRelu { slope: s } => slope = s,
            LayerSpec::BatchNorm { .. } => {}
        }
    }
    let latent = widths.pop().unwrap_or(model.latent_dim());
    ArchConfig {
        hidden: widths,
        latent,
        leaky_slope: slope,
    }
}

/// [`train_dsvdd`] with an explicit decoder layout and weight source. The
/// weight source applies to the center-distance phase only.
pub fn train_dsvdd_with(
    model: &mut DsvddModel,
    data: &LabeledDataset,
    config: &TrainConfig,
    arch: &ArchConfig,
    weighting: &dyn BatchWeighting,
) -> Result<TrainLog> {
    config.validate()?;
    let features = training_rows(data, model.input_dim())?;
    let mut log = TrainLog::default();

    if config.pretrain_epochs > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_DECODER_INIT, 0));
        let decoder = crate::nn::DenseNetwork::new(&arch.decoder_specs(model.input_dim(), false), &mut rng)?;
        let mut ae = Autoencoder::from_parts(model.encoder.clone(), decoder)?;
        let mut enc_opt = AdamState::new(&ae.encoder, config.learning_rate, config.weight_decay);
        let mut dec_opt = AdamState::new(&ae.decoder, config.learning_rate, config.weight_decay);
        run_epochs(
            &features,
            config,
            Phase::Pretrain,
            config.pretrain_epochs,
            STREAM_PRETRAIN_SHUFFLE,
            &mut log,
            |x| ae_step(&mut ae, &mut enc_opt, &mut dec_opt, x, &UnitWeights),
        )?;
        model.encoder = ae.encoder;
    }

    let center = dsvdd_init_center(model, &features)?;
    model.center = Some(center.clone());
    let mut opt = AdamState::new(&model.encoder, config.learning_rate, config.weight_decay);
    run_epochs(
        &features,
        config,
        Phase::Main,
        config.epochs,
        STREAM_SHUFFLE,
        &mut log,
        |x| dsvdd_step(model, &mut opt, &center, x, weighting),
    )?;
    Ok(log)
}

/// Either host detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HostModel {
    Ae(Autoencoder),
    Dsvdd(DsvddModel),
}

impl HostModel {
    /// Freshly initialized model, seeded from `seed`.
    pub fn new(kind: ModelKind, input_dim: usize, arch: &ArchConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_INIT, 0));
        Ok(match kind {
            ModelKind::Ae => HostModel::Ae(Autoencoder::new(input_dim, arch, &mut rng)?),
            ModelKind::Dsvdd => HostModel::Dsvdd(DsvddModel::new(input_dim, arch, &mut rng)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            HostModel::Ae(_) => ModelKind::Ae,
            HostModel::Dsvdd(_) => ModelKind::Dsvdd,
        }
    }

    /// Eval-mode anomaly scores.
    pub fn scores(&self, x: &Matrix) -> Result<ScoreBatch> {
        match self {
            HostModel::Ae(m) => ae_scores(m, x),
            HostModel::Dsvdd(m) => dsvdd_scores(m, x),
        }
    }
}

/// Trains either host model according to `config.loss_mode`.
pub fn train(model: &mut HostModel, data: &LabeledDataset, config: &TrainConfig) -> Result<TrainLog> {
    match model {
        HostModel::Ae(m) => train_autoencoder(m, data, config),
        HostModel::Dsvdd(m) => train_dsvdd(m, data, config),
    }
}
