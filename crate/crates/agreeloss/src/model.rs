//! Sparse linear classifier and deterministic training loop.
//!
//! The classifier is a single linear layer over hashed n-gram features with
//! a sigmoid output, trained by plain mini-batch SGD. No optimizer state, no
//! parallel reductions: batches are visited in a seeded shuffle order and
//! gradients are applied example-by-example in a fixed sequence, so two runs
//! with the same config produce bit-identical parameters.
//!
//! Batch gradients follow the chain rule through the selected loss: with
//! `g_i = dL/dp_i` from [`grad_wrt_pred`] and `p_i` the (clamped) sigmoid
//! output, the logit gradient is `dL/dz_i = g_i * p_i * (1 - p_i)`. For the
//! noisy loss on a single gold-label-1 sentence the sigmoid factors cancel
//! and this collapses to `p - r`. Note the batch normalizers (total votes,
//! or total agreeing votes) are computed per mini-batch, so an example's
//! update depends on its batch mates.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::features::{featurize, FeatureError, FeaturizerConfig, SparseVector};
use crate::losses::{batch_loss, grad_wrt_pred, BatchTarget, LossError, LossKind, Probabilities};
use crate::rng;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: model has {model}, input has {input}")]
    DimMismatch { model: usize, input: usize },
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Dense weight vector plus bias; the learned causality scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    weights: Vec<f64>,
    bias: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn from_parts(weights: Vec<f64>, bias: f64) -> Self {
        LinearModel { weights, bias }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Raw score `w . x + b`.
    pub fn logit(&self, x: &SparseVector) -> Result<f64, ModelError> {
        if x.dim() != self.dim() {
            return Err(ModelError::DimMismatch {
                model: self.dim(),
                input: x.dim(),
            });
        }
        let mut z = self.bias;
        for (index, value) in x.iter() {
            z += self.weights[index as usize] * value;
        }
        Ok(z)
    }

    /// Predicted causality probability `sigmoid(w . x + b)`, clamped into
    /// `(0, 1)` so saturated logits never round to exactly 0 or 1.
    pub fn forward(&self, x: &SparseVector) -> Result<f64, ModelError> {
        Ok(sigmoid(self.logit(x)?).clamp(Probabilities::EPS, 1.0 - Probabilities::EPS))
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Training hyperparameters. The learning-rate default is sized for
/// fine-tuning very large encoders; for this linear model values around
/// 0.5-4 are the practical range, so the CLI exposes `--lr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub loss: LossKind,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            lr: 5e-5,
            seed: 42,
            batch_size: 32,
            loss: LossKind::Vanilla,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs < 1 {
            return Err(ModelError::InvalidConfig("epochs must be at least 1".to_string()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.batch_size < 1 {
            return Err(ModelError::InvalidConfig("batch_size must be at least 1".to_string()));
        }
        Ok(())
    }
}

/// Loss value and per-example logit gradients `dL/dz_i` for one batch.
pub fn batch_forward_backward(
    model: &LinearModel,
    inputs: &[&SparseVector],
    target: &BatchTarget,
    kind: LossKind,
) -> Result<(f64, Vec<f64>), ModelError> {
    let mut preds = Vec::with_capacity(inputs.len());
    for x in inputs {
        preds.push(model.forward(x)?);
    }
    let preds = Probabilities::new(preds);
    let loss = batch_loss(kind, &preds, target)?;
    let grad_pred = grad_wrt_pred(kind, &preds, target)?;
    let logit_grads = preds
        .as_slice()
        .iter()
        .zip(&grad_pred)
        .map(|(&p, &g)| g * p * (1.0 - p))
        .collect();
    Ok((loss, logit_grads))
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: LinearModel,
    /// Mean batch loss per epoch.
    pub trace: Vec<f64>,
}

/// Mini-batch gradient descent over the dataset.
///
/// Examples are featurized once up front. Each epoch shuffles the visit
/// order from a ChaCha stream seeded by `tcfg.seed` (when shuffling is on)
/// and walks the batches; within a batch all probabilities are computed
/// before any parameter moves, then updates are applied example-by-example
/// in batch order.
pub fn train(ds: &Dataset, fcfg: &FeaturizerConfig, tcfg: &TrainConfig) -> Result<TrainResult, ModelError> {
    fcfg.validate()?;
    tcfg.validate()?;
    if ds.is_empty() {
        return Err(ModelError::EmptyDataset);
    }

    let features: Vec<SparseVector> = ds.iter().map(|e| featurize(&e.text, fcfg)).collect();
    let mut model = LinearModel::zeros(fcfg.dim);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut shuffler = rng::seeded(tcfg.seed);
    let mut trace = Vec::with_capacity(tcfg.epochs);

    for epoch in 1..=tcfg.epochs {
        if tcfg.shuffle {
            rng::shuffle(&mut shuffler, &mut order);
        }
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (batch_index, chunk) in order.chunks(tcfg.batch_size).enumerate() {
            let batch_examples: Vec<_> = chunk.iter().map(|&i| ds.examples()[i].clone()).collect();
            let target = BatchTarget::from_examples(&batch_examples)?;
            let inputs: Vec<&SparseVector> = chunk.iter().map(|&i| &features[i]).collect();
            let (loss, logit_grads) = batch_forward_backward(&model, &inputs, &target, tcfg.loss)?;
            if !loss.is_finite() || logit_grads.iter().any(|g| !g.is_finite()) {
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    batch: batch_index + 1,
                });
            }
            for (x, &g) in inputs.iter().zip(&logit_grads) {
                for (index, value) in x.iter() {
                    model.weights[index as usize] -= tcfg.lr * g * value;
                }
                model.bias -= tcfg.lr * g;
            }
            loss_sum += loss;
            batches += 1;
        }
        let epoch_loss = loss_sum / batches as f64;
        log::debug!("epoch {epoch}: mean batch loss {epoch_loss}");
        trace.push(epoch_loss);
    }
    Ok(TrainResult { model, trace })
}

/// Thresholded predictions in dataset order; ties (`p == threshold`) go to
/// label 1.
pub fn predict(
    model: &LinearModel,
    ds: &Dataset,
    fcfg: &FeaturizerConfig,
    threshold: f64,
) -> Result<Vec<u8>, ModelError> {
    let mut labels = Vec::with_capacity(ds.len());
    for example in ds.iter() {
        let p = model.forward(&featurize(&example.text, fcfg))?;
        labels.push(u8::from(p >= threshold));
    }
    Ok(labels)
}

// ---------------------------------------------------------------------------
// Checkpoint format
// ---------------------------------------------------------------------------

/// Model plus the featurizer config it was trained with.
///
/// On-disk layout (all integers and floats little-endian):
/// magic `AGLSCKPT`, format version `u16`, `dim: u32`, `ngram_min: u8`,
/// `ngram_max: u8`, `lowercase: u8`, `normalize: u8`, `bias: f64`, then
/// `dim` weights as `f64`. Loading rejects unknown magic or version,
/// invalid configs, truncated or oversized files, and non-finite parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: LinearModel,
    pub featurizer: FeaturizerConfig,
}

const CHECKPOINT_MAGIC: [u8; 8] = *b"AGLSCKPT";
const CHECKPOINT_VERSION: u16 = 1;

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        debug_assert_eq!(self.model.dim(), self.featurizer.dim);
        writer.write_all(&CHECKPOINT_MAGIC)?;
        writer.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        writer.write_all(&(self.featurizer.dim as u32).to_le_bytes())?;
        writer.write_all(&[
            self.featurizer.ngram_min as u8,
            self.featurizer.ngram_max as u8,
            u8::from(self.featurizer.lowercase),
            u8::from(self.featurizer.normalize),
        ])?;
        writer.write_all(&self.model.bias.to_le_bytes())?;
        for w in &self.model.weights {
            writer.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut reader: R) -> Result<Checkpoint, ModelError> {
        let corrupt = |message: &str| ModelError::InvalidCheckpoint(message.to_string());
        let mut magic = [0u8; 8];
        read_exact(&mut reader, &mut magic)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u16::from_le_bytes(read_array(&mut reader)?);
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::UnsupportedVersion(version));
        }
        let dim = u32::from_le_bytes(read_array(&mut reader)?) as usize;
        let mut flags = [0u8; 4];
        read_exact(&mut reader, &mut flags)?;
        if flags[2] > 1 || flags[3] > 1 {
            return Err(corrupt("boolean flag out of range"));
        }
        let featurizer = FeaturizerConfig {
            dim,
            ngram_min: flags[0] as usize,
            ngram_max: flags[1] as usize,
            lowercase: flags[2] == 1,
            normalize: flags[3] == 1,
        };
        featurizer
            .validate()
            .map_err(|e| ModelError::InvalidCheckpoint(e.to_string()))?;

        let bias = f64::from_le_bytes(read_array(&mut reader)?);
        let mut weights = vec![0.0f64; dim];
        for w in &mut weights {
            *w = f64::from_le_bytes(read_array(&mut reader)?);
        }
        let mut probe = [0u8; 1];
        if reader.read(&mut probe).map_err(io_invalid)? != 0 {
            return Err(corrupt("trailing bytes after weights"));
        }
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(corrupt("non-finite parameter"));
        }
        Ok(Checkpoint {
            model: LinearModel { weights, bias },
            featurizer,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut writer = BufWriter::new(file);
        self.write_to(&mut writer).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint, ModelError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Checkpoint::read_from(BufReader::new(file))
    }
}

fn io_invalid(e: std::io::Error) -> ModelError {
    ModelError::InvalidCheckpoint(e.to_string())
}

fn read_exact<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<(), ModelError> {
    reader.read_exact(buf).map_err(|_| ModelError::InvalidCheckpoint("unexpected end of file".to_string()))
}

fn read_array<R: Read, const N: usize>(reader: &mut R) -> Result<[u8; N], ModelError> {
    let mut buf = [0u8; N];
    read_exact(reader, &mut buf)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_corpus, synth_vocab, AnnotatedExample, Dataset};

    fn small_featurizer() -> FeaturizerConfig {
        FeaturizerConfig {
            dim: 1 << 12,
            ..FeaturizerConfig::default()
        }
    }

    #[test]
    fn zero_model_outputs_one_half() {
        let cfg = small_featurizer();
        let model = LinearModel::zeros(cfg.dim);
        let x = featurize("any text at all", &cfg);
        assert_eq!(model.forward(&x).unwrap(), 0.5);
    }

    #[test]
    fn logit_of_ln_three_gives_three_quarters() {
        let cfg = FeaturizerConfig {
            normalize: false,
            ..small_featurizer()
        };
        let x = featurize("causal", &cfg);
        let mut weights = vec![0.0; cfg.dim];
        weights[x.indices()[0] as usize] = 3f64.ln();
        let model = LinearModel::from_parts(weights, 0.0);
        assert!((model.forward(&x).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn forward_matches_dense_dot_product_oracle() {
        let cfg = small_featurizer();
        let mut rng = crate::rng::seeded(9);
        let weights: Vec<f64> = (0..cfg.dim).map(|_| crate::rng::unit_f64(&mut rng) - 0.5).collect();
        let bias = crate::rng::unit_f64(&mut rng) - 0.5;
        let model = LinearModel::from_parts(weights.clone(), bias);
        let x = featurize("the protest march led to a wage meeting downtown", &cfg);

        let mut dense = vec![0.0; cfg.dim];
        for (i, v) in x.iter() {
            dense[i as usize] = v;
        }
        let mut z = bias;
        for (w, v) in weights.iter().zip(&dense) {
            z += w * v;
        }
        let expected = 1.0 / (1.0 + (-z).exp());
        assert!((model.forward(&x).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let model = LinearModel::zeros(1 << 12);
        let other = FeaturizerConfig {
            dim: 1 << 13,
            ..FeaturizerConfig::default()
        };
        let x = featurize("text", &other);
        assert!(matches!(
            model.forward(&x),
            Err(ModelError::DimMismatch { model: 4096, input: 8192 })
        ));
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) <= 1.0 && sigmoid(800.0) > 0.999);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0) < 1e-300);
    }

    fn quick_train_config(loss: LossKind) -> TrainConfig {
        TrainConfig {
            epochs: 30,
            lr: 2.0,
            seed: 42,
            batch_size: 32,
            loss,
            shuffle: true,
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        let vocab = synth_vocab();
        let ds = synth_corpus(11, 200, &vocab, 0.2).unwrap();
        let fcfg = small_featurizer();
        let tcfg = quick_train_config(LossKind::Refined);
        let a = train(&ds, &fcfg, &tcfg).unwrap();
        let b = train(&ds, &fcfg, &tcfg).unwrap();
        assert_eq!(a.model, b.model);
        let bits = |t: &[f64]| t.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.trace), bits(&b.trace));
    }

    #[test]
    fn separable_corpus_is_learned() {
        let vocab = synth_vocab();
        let ds = synth_corpus(42, 800, &vocab, 0.0).unwrap();
        let fcfg = small_featurizer();
        let tcfg = TrainConfig {
            epochs: 50,
            ..quick_train_config(LossKind::Vanilla)
        };
        let result = train(&ds, &fcfg, &tcfg).unwrap();
        let predictions = predict(&result.model, &ds, &fcfg, 0.5).unwrap();
        let hits = predictions
            .iter()
            .zip(ds.iter())
            .filter(|(&p, e)| p == e.label)
            .count();
        assert!(hits as f64 / ds.len() as f64 >= 0.99, "accuracy {}", hits as f64 / ds.len() as f64);
        // Loose trace check: training should end lower than it started.
        assert!(result.trace.last().unwrap() < result.trace.first().unwrap());
    }

    #[test]
    fn noisy_with_unit_agreement_matches_vanilla_trajectory() {
        // All agreements 1 and all vote counts equal: the noisy loss is the
        // vanilla loss, and with a shared seed the whole parameter
        // trajectory must match bit for bit.
        let vocab = synth_vocab();
        let base = synth_corpus(5, 120, &vocab, 0.0).unwrap();
        let examples: Vec<AnnotatedExample> = base
            .iter()
            .map(|e| AnnotatedExample::new(e.text.clone(), e.label, 3, 1.0).unwrap())
            .collect();
        let ds = Dataset::new(examples).unwrap();
        let fcfg = small_featurizer();
        let noisy = train(&ds, &fcfg, &quick_train_config(LossKind::Noisy)).unwrap();
        let vanilla = train(&ds, &fcfg, &quick_train_config(LossKind::Vanilla)).unwrap();
        assert_eq!(noisy.model, vanilla.model);
    }

    #[test]
    fn logit_gradient_identity_for_noisy_single_sentence() {
        // dL/dz = p - r exactly (up to rounding) when y_true = 1 and M = 1.
        let cfg = small_featurizer();
        let x = featurize("the strike caused a protest", &cfg);
        let mut rng = crate::rng::seeded(3);
        for &r in &[0.5, 0.6, 2.0 / 3.0, 0.8, 1.0] {
            for _ in 0..20 {
                let weights: Vec<f64> = (0..cfg.dim).map(|_| 0.2 * (crate::rng::unit_f64(&mut rng) - 0.5)).collect();
                let model = LinearModel::from_parts(weights, 0.1);
                let p = model.forward(&x).unwrap();
                let target = BatchTarget::new(vec![1], vec![3], vec![r]).unwrap();
                let (_, grads) = batch_forward_backward(&model, &[&x], &target, LossKind::Noisy).unwrap();
                assert!((grads[0] - (p - r)).abs() <= 1e-12, "r={r} p={p} g={}", grads[0]);
            }
        }
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let cfg = small_featurizer();
        let x = featurize("protest because of wage demands", &cfg);
        let mut rng = crate::rng::seeded(17);
        let step = 1e-6;
        for kind in LossKind::ALL {
            for label in [0u8, 1] {
                for &r in &[2.0 / 3.0, 1.0] {
                    let weights: Vec<f64> =
                        (0..cfg.dim).map(|_| 0.4 * (crate::rng::unit_f64(&mut rng) - 0.5)).collect();
                    let model = LinearModel::from_parts(weights.clone(), -0.2);
                    let target = BatchTarget::new(vec![label], vec![3], vec![r]).unwrap();
                    let (_, grads) = batch_forward_backward(&model, &[&x], &target, kind).unwrap();
                    let g = grads[0];

                    let loss_at = |model: &LinearModel| {
                        let p = Probabilities::new(vec![model.forward(&x).unwrap()]);
                        batch_loss(kind, &p, &target).unwrap()
                    };
                    // Weight gradient at each touched index, then the bias.
                    for (index, value) in x.iter() {
                        let analytic = g * value;
                        let mut plus = weights.clone();
                        plus[index as usize] += step;
                        let mut minus = weights.clone();
                        minus[index as usize] -= step;
                        let numeric = (loss_at(&LinearModel::from_parts(plus, -0.2))
                            - loss_at(&LinearModel::from_parts(minus, -0.2)))
                            / (2.0 * step);
                        if analytic.abs() > 1e-8 {
                            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
                            assert!(rel <= 1e-5, "{kind} label={label} r={r}: {analytic} vs {numeric}");
                        }
                    }
                    let numeric_bias = (loss_at(&LinearModel::from_parts(weights.clone(), -0.2 + step))
                        - loss_at(&LinearModel::from_parts(weights.clone(), -0.2 - step)))
                        / (2.0 * step);
                    if g.abs() > 1e-8 {
                        let rel = (g - numeric_bias).abs() / g.abs().max(numeric_bias.abs());
                        assert!(rel <= 1e-5, "{kind} label={label} r={r} bias: {g} vs {numeric_bias}");
                    }
                }
            }
        }
    }

    #[test]
    fn runaway_learning_rate_reports_non_finite_loss() {
        // An absurd learning rate overflows the heavily repeated tokens to
        // +inf (positive sentence) and -inf (negative sentence) in the first
        // batch; the sentence containing both then scores NaN.
        let ds = Dataset::new(vec![
            AnnotatedExample::new("b ".repeat(12).trim(), 1, 1, 1.0).unwrap(),
            AnnotatedExample::new("c ".repeat(12).trim(), 0, 1, 1.0).unwrap(),
            AnnotatedExample::new("b c", 1, 1, 1.0).unwrap(),
        ])
        .unwrap();
        let fcfg = FeaturizerConfig {
            normalize: false,
            ..small_featurizer()
        };
        let tcfg = TrainConfig {
            lr: f64::MAX,
            epochs: 2,
            ..quick_train_config(LossKind::Vanilla)
        };
        match train(&ds, &fcfg, &tcfg) {
            Err(ModelError::NonFiniteLoss { epoch: 2, batch: 1 }) => {}
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let ds = Dataset::new(Vec::new()).unwrap();
        assert!(matches!(
            train(&ds, &small_featurizer(), &TrainConfig::default()),
            Err(ModelError::EmptyDataset)
        ));
    }

    #[test]
    fn prediction_threshold_ties_go_to_one() {
        let cfg = small_featurizer();
        let ds = Dataset::new(vec![
            AnnotatedExample::new("anything", 0, 1, 1.0).unwrap(),
            AnnotatedExample::new("else", 1, 1, 1.0).unwrap(),
        ])
        .unwrap();
        let model = LinearModel::zeros(cfg.dim);
        // Zero model outputs exactly 0.5 everywhere.
        assert_eq!(predict(&model, &ds, &cfg, 0.5).unwrap(), vec![1, 1]);
        assert_eq!(predict(&model, &ds, &cfg, 1.1).unwrap(), vec![0, 0]);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let cfg = FeaturizerConfig {
            dim: 1 << 12,
            ngram_min: 2,
            ngram_max: 3,
            lowercase: false,
            normalize: false,
        };
        let mut rng = crate::rng::seeded(23);
        let weights: Vec<f64> = (0..cfg.dim).map(|_| crate::rng::unit_f64(&mut rng) - 0.5).collect();
        let checkpoint = Checkpoint {
            model: LinearModel::from_parts(weights, 0.37),
            featurizer: cfg,
        };
        let mut bytes = Vec::new();
        checkpoint.write_to(&mut bytes).unwrap();
        let reloaded = Checkpoint::read_from(bytes.as_slice()).unwrap();
        assert_eq!(checkpoint, reloaded);
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let cfg = small_featurizer();
        let checkpoint = Checkpoint {
            model: LinearModel::zeros(cfg.dim),
            featurizer: cfg,
        };
        let mut bytes = Vec::new();
        checkpoint.write_to(&mut bytes).unwrap();

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            Checkpoint::read_from(bad_magic.as_slice()),
            Err(ModelError::InvalidCheckpoint(_))
        ));

        let mut bad_version = bytes.clone();
        bad_version[8] = 99;
        assert!(matches!(
            Checkpoint::read_from(bad_version.as_slice()),
            Err(ModelError::UnsupportedVersion(99))
        ));

        assert!(matches!(
            Checkpoint::read_from(&bytes[..bytes.len() - 3]),
            Err(ModelError::InvalidCheckpoint(_))
        ));

        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(matches!(
            Checkpoint::read_from(trailing.as_slice()),
            Err(ModelError::InvalidCheckpoint(_))
        ));

        let mut nan_weight = bytes;
        let at = nan_weight.len() - 8;
        nan_weight[at..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            Checkpoint::read_from(nan_weight.as_slice()),
            Err(ModelError::InvalidCheckpoint(_))
        ));
    }

    #[test]
    fn checkpoint_decoder_survives_random_corruption() {
        // In-tree mini-fuzzer (the libFuzzer targets need nightly): random
        // byte flips, truncations and extensions of a valid checkpoint must
        // never panic, and anything still accepted must re-encode exactly.
        let cfg = FeaturizerConfig {
            dim: 1 << 10,
            ..FeaturizerConfig::default()
        };
        let checkpoint = Checkpoint {
            model: LinearModel::from_parts(vec![0.125; cfg.dim], -1.5),
            featurizer: cfg,
        };
        let mut valid = Vec::new();
        checkpoint.write_to(&mut valid).unwrap();

        let mut rng = crate::rng::seeded(31);
        for _ in 0..2000 {
            let mut bytes = valid.clone();
            match crate::rng::below(&mut rng, 3) {
                0 => {
                    for _ in 0..=crate::rng::below(&mut rng, 8) {
                        let at = crate::rng::below(&mut rng, bytes.len() as u64) as usize;
                        bytes[at] ^= crate::rng::below(&mut rng, 255) as u8 + 1;
                    }
                }
                1 => {
                    let keep = crate::rng::below(&mut rng, bytes.len() as u64 + 1) as usize;
                    bytes.truncate(keep);
                }
                _ => {
                    for _ in 0..=crate::rng::below(&mut rng, 16) {
                        bytes.push(crate::rng::below(&mut rng, 256) as u8);
                    }
                }
            }
            if let Ok(decoded) = Checkpoint::read_from(bytes.as_slice()) {
                assert!(decoded.featurizer.validate().is_ok());
                assert_eq!(decoded.model.dim(), decoded.featurizer.dim);
                let mut round_trip = Vec::new();
                decoded.write_to(&mut round_trip).unwrap();
                assert_eq!(round_trip, bytes);
            }
        }
    }

    #[test]
    fn checkpoint_rejects_absurd_dimensions() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"AGLSCKPT");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 1, 1]);
        assert!(matches!(
            Checkpoint::read_from(bytes.as_slice()),
            Err(ModelError::InvalidCheckpoint(_))
        ));
    }
}
