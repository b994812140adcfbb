//! Supervised training for both model families.
//!
//! Both learners run Adam over one sequence chunk per step. Sequences are
//! visited in a seeded random order each epoch; the chunks of one sequence
//! are visited in order so the LSTM state can be carried across chunk
//! boundaries (gradients are truncated there). After every epoch the
//! parameters are rounded to `f32` (model file precision) and scored on the
//! dev set; the best-scoring snapshot is returned.

mod adam;
mod bptt;
mod split;

use std::fmt;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use adam::Adam;
pub use bptt::{backward, chunk_backward, nll_loss, ChunkGradient, Gradient};
pub use split::{split_corpus, CorpusSplit, HasSource, SplitPart};

use crate::dataio::LabeledSequence;
use crate::error::{Error, Result};
use crate::models::{sigmoid, Classifier, LinearClassifier, LstmClassifier, DEFAULT_HIDDEN};
use crate::pose_features::PointSubset;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// BPTT chunk length in frames.
    pub chunk_len: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub subset: PointSubset,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 50,
            chunk_len: 500,
            patience: 5,
            seed: 42,
            subset: PointSubset::PoseBody,
            hidden_dim: DEFAULT_HIDDEN,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.chunk_len == 0 || self.patience == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidArgument(
                "learning rate, epochs, chunk length, patience and hidden size must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Frame-weighted mean of the chunk losses seen during the epoch.
    pub train_loss: f64,
    pub dev_accuracy: f64,
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {:>3}  loss {:.6}  dev_acc {:.4}",
            self.epoch, self.train_loss, self.dev_accuracy
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl<M> TrainOutcome<M> {
    pub fn best_dev_accuracy(&self) -> f64 {
        self.history[self.best_epoch - 1].dev_accuracy
    }
}

fn check_corpus(corpus: &[LabeledSequence], dim: usize) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for s in corpus {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.dim(),
            });
        }
    }
    Ok(())
}

fn chunk_bounds(len: usize, chunk: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..len).step_by(chunk).map(move |s| (s, (s + chunk).min(len)))
}

/// Pooled frame accuracy of `classifier` over `corpus`.
pub fn corpus_accuracy(classifier: &Classifier, corpus: &[LabeledSequence]) -> Result<f64> {
    let counts: Result<Vec<(usize, usize)>> = corpus
        .par_iter()
        .map(|s| {
            let pred = classifier.predict_labels(s.features.view())?;
            let ok = pred.iter().zip(&s.labels).filter(|(a, b)| a == b).count();
            Ok((ok, s.len()))
        })
        .collect();
    let (ok, total) = counts?
        .into_iter()
        .fold((0, 0), |(a, b), (c, d)| (a + c, b + d));
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(ok as f64 / total as f64)
}

struct EarlyStopping<M> {
    patience: usize,
    best: Option<(M, f64, usize)>,
    since_best: usize,
    history: Vec<EpochRecord>,
}

impl<M> EarlyStopping<M> {
    fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            since_best: 0,
            history: Vec::new(),
        }
    }

    /// Records an epoch; returns true when training should stop.
    fn record(&mut self, snapshot: M, train_loss: f64, dev_accuracy: f64) -> bool {
        let epoch = self.history.len() + 1;
        self.history.push(EpochRecord {
            epoch,
            train_loss,
            dev_accuracy,
        });
        let improved = self.best.as_ref().is_none_or(|(_, acc, _)| dev_accuracy > *acc);
        if improved {
            self.best = Some((snapshot, dev_accuracy, epoch));
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        self.since_best >= self.patience
    }

    fn finish(self) -> TrainOutcome<M> {
        let (model, _, best_epoch) = self.best.expect("at least one epoch");
        TrainOutcome {
            model,
            history: self.history,
            best_epoch,
        }
    }
}

/// Trains the LSTM tagger. When `dev` is empty the training set doubles as
/// the early-stopping set.
pub fn train(
    train_set: &[LabeledSequence],
    dev: &[LabeledSequence],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<LstmClassifier>> {
    cfg.validate()?;
    let dim = cfg.subset.dim();
    check_corpus(train_set, dim)?;
    if !dev.is_empty() {
        check_corpus(dev, dim)?;
    }
    let dev = if dev.is_empty() { train_set } else { dev };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = LstmClassifier::random(dim, cfg.hidden_dim, &mut rng);
    let mut adam = Adam::new(model.param_count(), cfg.learning_rate);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut frames) = (0.0, 0usize);
        for &i in &order {
            let seq = &train_set[i];
            let mut state = model.initial_state();
            for (s, e) in chunk_bounds(seq.len(), cfg.chunk_len) {
                let x = seq.features.slice(ndarray::s![s..e, ..]);
                let step = chunk_backward(&model, &state, x, &seq.labels[s..e])?;
                adam.step(model.params_mut(), step.gradient.values());
                loss_sum += step.loss * (e - s) as f64;
                frames += e - s;
                state = step.final_state;
            }
        }
        let mut snapshot = model.clone();
        snapshot.round_to_f32();
        let acc = corpus_accuracy(&Classifier::Lstm(snapshot.clone()), dev)?;
        let loss = if frames > 0 { loss_sum / frames as f64 } else { 0.0 };
        if stopper.record(snapshot, loss, acc) {
            break;
        }
    }
    Ok(stopper.finish())
}

/// Logistic-loss gradient of a linear classifier over frames `s..e` of one
/// sequence (left context may reach before `s`). Returns the mean loss.
fn linear_chunk_gradient(
    model: &LinearClassifier,
    features: ArrayView2<'_, f64>,
    labels: &[u8],
    s: usize,
    e: usize,
    grad: &mut [f64],
) -> f64 {
    let (w, d) = (model.window(), model.input_dim());
    let weights = model.weights();
    grad.fill(0.0);
    let n = (e - s) as f64;
    let mut loss = 0.0;
    for t in s..e {
        let rows = |k: usize| (t + k + 1).checked_sub(w).map(|src| features.row(src));
        let mut z = 0.0;
        for k in 0..w {
            if let Some(row) = rows(k) {
                z += row.iter().zip(&weights[k * d..(k + 1) * d]).map(|(x, w)| x * w).sum::<f64>();
            }
        }
        let y = labels[t] as f64;
        // softplus(z) - y z, written to avoid overflow
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        let err = (sigmoid(z) - y) / n;
        for k in 0..w {
            if let Some(row) = rows(k) {
                for (g, x) in grad[k * d..(k + 1) * d].iter_mut().zip(row.iter()) {
                    *g += err * x;
                }
            }
        }
    }
    loss / n
}

/// Trains a fixed-context linear baseline on 25 body points. Weights start
/// at zero.
pub fn train_linear(
    train_set: &[LabeledSequence],
    dev: &[LabeledSequence],
    window: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<LinearClassifier>> {
    cfg.validate()?;
    if window == 0 {
        return Err(Error::InvalidArgument("linear window must be >= 1".into()));
    }
    let dim = PointSubset::PoseBody.dim();
    check_corpus(train_set, dim)?;
    if !dev.is_empty() {
        check_corpus(dev, dim)?;
    }
    let dev = if dev.is_empty() { train_set } else { dev };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = LinearClassifier::zeros(window, dim);
    let mut adam = Adam::new(model.param_count(), cfg.learning_rate);
    let mut grad = vec![0.0; model.param_count()];
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut frames) = (0.0, 0usize);
        for &i in &order {
            let seq = &train_set[i];
            for (s, e) in chunk_bounds(seq.len(), cfg.chunk_len) {
                let loss = linear_chunk_gradient(&model, seq.features.view(), &seq.labels, s, e, &mut grad);
                adam.step(model.weights_mut(), &grad);
                loss_sum += loss * (e - s) as f64;
                frames += e - s;
            }
        }
        let mut snapshot = model.clone();
        snapshot.round_to_f32();
        let acc = corpus_accuracy(&Classifier::Linear(snapshot.clone()), dev)?;
        let loss = if frames > 0 { loss_sum / frames as f64 } else { 0.0 };
        if stopper.record(snapshot, loss, acc) {
            break;
        }
    }
    Ok(stopper.finish())
}
