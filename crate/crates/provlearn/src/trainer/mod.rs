//! Training and evaluation harness for whole-graph classification:
//! stratified k-fold cross-validation, seeded epoch loops with gradient
//! batching, early stopping on validation F1, checkpointing, and metric
//! aggregation.
//!
//! Everything downstream of a [`TrainingArguments`] value is deterministic:
//! fold membership, shuffle order, dropout masks, and parameter updates all
//! derive from explicit seeds, so two runs over the same examples produce
//! identical histories and summaries.

mod report;

pub use report::{report, ReportFormat};

use std::path::PathBuf;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureSet;
use crate::gnn::{
    adam_step, stack_features, AdamConfig, AdamState, Aggregation, GnnError, GradientTape,
    GraphEncoding, Mode, RGCNModel, DEFAULT_DROPOUT, DEFAULT_HIDDEN_DIM, DEFAULT_NUM_LAYERS,
};
use crate::graph::{DatasetSchema, HeteroMultigraph, Label};

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("invalid fold count: {detail}")]
    InvalidFoldCount { detail: String },
    #[error("invalid training arguments: {detail}")]
    InvalidArguments { detail: String },
    #[error("graph carries no class label")]
    UnlabeledGraph,
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Hyperparameters for one training run. Mirrors the JSON run-configuration
/// schema field for field; absent fields take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingArguments {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub aggregation: Aggregation,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub dropout: f64,
    /// Evaluations without validation-F1 improvement before stopping;
    /// `None` disables early stopping.
    pub early_stopping_patience: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Validation cadence in epochs.
    pub eval_every: usize,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for TrainingArguments {
    fn default() -> Self {
        TrainingArguments {
            epochs: 10,
            learning_rate: 1e-3,
            weight_decay: 0.005,
            aggregation: Aggregation::Sum,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            num_layers: DEFAULT_NUM_LAYERS,
            dropout: DEFAULT_DROPOUT,
            early_stopping_patience: None,
            checkpoint_dir: None,
            eval_every: 1,
            seed: 0,
            batch_size: 8,
        }
    }
}

impl TrainingArguments {
    pub fn validate(&self) -> Result<(), TrainerError> {
        let fail = |detail: String| Err(TrainerError::InvalidArguments { detail });
        if self.epochs < 1 {
            return fail("epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail(format!("weight decay {} must be non-negative", self.weight_decay));
        }
        if self.hidden_dim < 1 || self.num_layers < 1 {
            return fail("hidden_dim and num_layers must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.early_stopping_patience == Some(0) {
            return fail("early stopping patience must be at least 1 when set".into());
        }
        if self.eval_every < 1 {
            return fail("eval_every must be at least 1".into());
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1".into());
        }
        Ok(())
    }
}

/// Classification quality on the attack class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of true attack examples scored.
    pub support: usize,
    /// Set when nothing was predicted as attack, making precision vacuous
    /// (reported as 0 by convention).
    pub degenerate: bool,
}

/// Confusion-matrix metrics over paired prediction/label vectors, with the
/// attack class positive. Zero denominators yield 0 rather than NaN.
pub fn metrics_from_predictions(predictions: &[Label], labels: &[Label]) -> Metrics {
    assert_eq!(predictions.len(), labels.len(), "prediction/label length mismatch");
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (Label::Attack, Label::Attack) => tp += 1,
            (Label::Attack, Label::Benign) => fp += 1,
            (Label::Benign, Label::Attack) => fn_ += 1,
            (Label::Benign, Label::Benign) => {}
        }
    }
    let degenerate = tp + fp == 0;
    let precision = if degenerate { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics { precision, recall, f1, support: tp + fn_, degenerate }
}

/// Everything the training loop needs from one graph, precomputed once:
/// schema-aligned edge encoding, stacked feature matrix, and label.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub encoding: GraphEncoding,
    pub features: Array2<f64>,
    pub label: Label,
}

impl TrainExample {
    /// Requires a labeled graph whose relations all appear in `schema`.
    pub fn prepare(
        g: &HeteroMultigraph,
        feats: &FeatureSet,
        schema: &DatasetSchema,
        aggregation: Aggregation,
    ) -> Result<Self, TrainerError> {
        let label = g.label.ok_or(TrainerError::UnlabeledGraph)?;
        let encoding = GraphEncoding::build(g, schema, aggregation)?;
        let features = stack_features(g, feats)?;
        Ok(TrainExample { encoding, features, label })
    }
}

/// Training-loop lifecycle notifications, delivered in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub enum CallbackEvent {
    EpochEnd { epoch: usize, mean_loss: f64, val: Option<Metrics> },
    Log { message: String },
    CheckpointSaved { epoch: usize, path: PathBuf },
    EarlyStop { epoch: usize, best_f1: f64 },
    TrainEnd { epochs_run: usize, failure: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub mean_loss: f64,
    /// Present on epochs where validation ran.
    pub val: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_val_f1: Option<f64>,
    pub stopped_early: bool,
}

/// One splitmix64 step; decorrelates seeds derived from a common parent.
fn mix_seed(seed: u64, salt: u64) -> u64 {
    let z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(salt.wrapping_add(1)));
    let z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stratified k-fold assignment over labels. Within each class, indices are
/// shuffled by `seed` and dealt round-robin, so fold sizes differ by at most
/// one per class. Returns `(train, test)` index pairs, each sorted.
pub fn kfold_split(
    labels: &[Label],
    k: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>, TrainerError> {
    if k < 2 {
        return Err(TrainerError::InvalidFoldCount {
            detail: format!("{k} folds requested, need at least 2"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    for class in [Label::Benign, Label::Attack] {
        let mut members: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if !members.is_empty() && members.len() < k {
            return Err(TrainerError::InvalidFoldCount {
                detail: format!("class {class} has {} members for {k} folds", members.len()),
            });
        }
        members.shuffle(&mut rng);
        for (pos, idx) in members.into_iter().enumerate() {
            fold_of[idx] = pos % k;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (idx, &fold) in fold_of.iter().enumerate() {
                if fold == f {
                    test.push(idx);
                } else {
                    train.push(idx);
                }
            }
            (train, test)
        })
        .collect())
}

/// Split `indices` into (train, val) with roughly `frac` of each class held
/// out for validation — at least one and never a whole class (single-member
/// classes stay in train). Order within `indices` is preserved.
fn stratified_holdout(
    indices: &[usize],
    labels: &[Label],
    frac: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = vec![false; indices.len()];
    for class in [Label::Benign, Label::Attack] {
        let mut members: Vec<usize> = (0..indices.len())
            .filter(|&p| labels[indices[p]] == class)
            .collect();
        if members.len() < 2 {
            continue;
        }
        let take = ((members.len() as f64 * frac).round() as usize).clamp(1, members.len() - 1);
        members.shuffle(&mut rng);
        for &p in &members[..take] {
            held[p] = true;
        }
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (p, &idx) in indices.iter().enumerate() {
        if held[p] {
            val.push(idx);
        } else {
            train.push(idx);
        }
    }
    (train, val)
}

fn evaluate_refs(model: &RGCNModel, set: &[&TrainExample]) -> Result<Metrics, GnnError> {
    let mut predictions = Vec::with_capacity(set.len());
    let mut labels = Vec::with_capacity(set.len());
    for ex in set {
        let (logits, _) = model.forward_encoded(&ex.encoding, &ex.features, Mode::Eval)?;
        predictions.push(if logits[1] > logits[0] { Label::Attack } else { Label::Benign });
        labels.push(ex.label);
    }
    Ok(metrics_from_predictions(&predictions, &labels))
}

/// Argmax predictions on `test_set`, scored on the attack class.
pub fn evaluate(model: &RGCNModel, test_set: &[TrainExample]) -> Result<Metrics, TrainerError> {
    let refs: Vec<&TrainExample> = test_set.iter().collect();
    Ok(evaluate_refs(model, &refs)?)
}

/// Run the seeded epoch loop on `model`: shuffled full passes with gradients
/// averaged per batch, validation every `eval_every` epochs, a checkpoint at
/// each validation improvement (plus the final state) when `checkpoint_dir`
/// is set, and early stopping after `patience` non-improving evaluations.
/// Events fire in order; a non-finite loss aborts with a `TrainEnd` carrying
/// the failure.
pub fn train(
    args: &TrainingArguments,
    model: &mut RGCNModel,
    train_set: &[&TrainExample],
    val_set: &[&TrainExample],
    mut on_event: impl FnMut(&CallbackEvent),
) -> Result<History, TrainerError> {
    args.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(TrainerError::InvalidArguments {
            detail: "training and validation sets must be non-empty".into(),
        });
    }
    if let Some(dir) = &args.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix_seed(args.seed, 0));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(mix_seed(args.seed, 1));
    let mut adam = AdamState::new(model);
    let adam_cfg = AdamConfig {
        lr: args.learning_rate,
        weight_decay: args.weight_decay,
        ..AdamConfig::default()
    };
    on_event(&CallbackEvent::Log {
        message: format!(
            "training on {} examples, validating on {}",
            train_set.len(),
            val_set.len()
        ),
    });

    let mut history = History { epochs: Vec::new(), best_val_f1: None, stopped_early: false };
    let mut strikes = 0usize;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=args.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(args.batch_size) {
            let mut tape = GradientTape::zeros(model);
            for &i in batch {
                let ex = train_set[i];
                let mode = Mode::Train { dropout_seed: dropout_rng.gen() };
                match model.loss_and_backward_encoded(&ex.encoding, &ex.features, ex.label, mode)
                {
                    Ok((loss, grads)) => {
                        loss_sum += loss;
                        tape.accumulate(&grads);
                    }
                    Err(e) => {
                        on_event(&CallbackEvent::TrainEnd {
                            epochs_run: history.epochs.len(),
                            failure: Some(e.to_string()),
                        });
                        return Err(e.into());
                    }
                }
            }
            tape.scale(1.0 / batch.len() as f64);
            adam_step(model, &mut adam, &tape, &adam_cfg);
        }
        let mean_loss = loss_sum / train_set.len() as f64;

        let val = if epoch % args.eval_every == 0 {
            match evaluate_refs(model, val_set) {
                Ok(m) => Some(m),
                Err(e) => {
                    on_event(&CallbackEvent::TrainEnd {
                        epochs_run: history.epochs.len(),
                        failure: Some(e.to_string()),
                    });
                    return Err(e.into());
                }
            }
        } else {
            None
        };
        history.epochs.push(EpochRecord { epoch, mean_loss, val });
        on_event(&CallbackEvent::EpochEnd { epoch, mean_loss, val });

        if let Some(metrics) = val {
            let improved = history.best_val_f1.is_none_or(|best| metrics.f1 > best);
            if improved {
                history.best_val_f1 = Some(metrics.f1);
                strikes = 0;
                if let Some(dir) = &args.checkpoint_dir {
                    let path = dir.join("best.ckpt");
                    model.save(&path)?;
                    on_event(&CallbackEvent::CheckpointSaved { epoch, path });
                }
            } else {
                strikes += 1;
                if args.early_stopping_patience.is_some_and(|p| strikes >= p) {
                    history.stopped_early = true;
                    on_event(&CallbackEvent::EarlyStop {
                        epoch,
                        best_f1: history.best_val_f1.unwrap_or(0.0),
                    });
                    break;
                }
            }
        }
    }
    if let Some(dir) = &args.checkpoint_dir {
        let path = dir.join("last.ckpt");
        model.save(&path)?;
        on_event(&CallbackEvent::CheckpointSaved { epoch: history.epochs.len(), path });
    }
    on_event(&CallbackEvent::TrainEnd { epochs_run: history.epochs.len(), failure: None });
    Ok(history)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateStat {
    pub mean: f64,
    /// Population standard deviation: the folds are the whole experiment,
    /// not a sample from one.
    pub std: f64,
}

fn aggregate(values: &[f64]) -> AggregateStat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    AggregateStat { mean, std: var.sqrt() }
}

/// Per-fold test metrics with mean ± population std per metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub folds: Vec<Metrics>,
    pub precision: AggregateStat,
    pub recall: AggregateStat,
    pub f1: AggregateStat,
}

/// Stratified k-fold cross-validation. Each fold holds its assigned slice
/// out for testing, carves a stratified 10% validation split from the rest,
/// and trains a freshly initialized model; checkpoints land under
/// `<checkpoint_dir>/fold<i>/`. Deterministic in (`args`, examples, `seed`).
pub fn cross_validate(
    args: &TrainingArguments,
    examples: &[TrainExample],
    schema: &DatasetSchema,
    k: usize,
    seed: u64,
) -> Result<CvSummary, TrainerError> {
    args.validate()?;
    let feature_dim = match examples.first() {
        Some(ex) => ex.features.ncols(),
        None => {
            return Err(TrainerError::InvalidArguments {
                detail: "cannot cross-validate an empty example set".into(),
            })
        }
    };
    let labels: Vec<Label> = examples.iter().map(|ex| ex.label).collect();
    let folds = kfold_split(&labels, k, seed)?;

    let mut fold_metrics = Vec::with_capacity(k);
    for (f, (train_idx, test_idx)) in folds.into_iter().enumerate() {
        let (tr_idx, va_idx) =
            stratified_holdout(&train_idx, &labels, 0.1, mix_seed(seed, 1_000 + f as u64));
        let tr: Vec<&TrainExample> = tr_idx.iter().map(|&i| &examples[i]).collect();
        let va: Vec<&TrainExample> = va_idx.iter().map(|&i| &examples[i]).collect();
        let te: Vec<&TrainExample> = test_idx.iter().map(|&i| &examples[i]).collect();

        let fold_seed = mix_seed(args.seed, f as u64);
        let mut fold_args = args.clone();
        fold_args.seed = fold_seed;
        fold_args.checkpoint_dir =
            args.checkpoint_dir.as_ref().map(|d| d.join(format!("fold{f}")));
        let mut model = RGCNModel::init(
            schema.clone(),
            feature_dim,
            args.hidden_dim,
            args.num_layers,
            args.aggregation,
            fold_seed,
        )
        .with_dropout(args.dropout);

        train(&fold_args, &mut model, &tr, &va, |event| {
            if let CallbackEvent::EpochEnd { epoch, mean_loss, .. } = event {
                log::debug!("fold {f} epoch {epoch}: mean loss {mean_loss:.6}");
            }
        })?;
        fold_metrics.push(evaluate_refs(&model, &te)?);
    }

    let stat = |pick: fn(&Metrics) -> f64| {
        aggregate(&fold_metrics.iter().map(pick).collect::<Vec<_>>())
    };
    Ok(CvSummary {
        precision: stat(|m| m.precision),
        recall: stat(|m| m.recall),
        f1: stat(|m| m.f1),
        folds: fold_metrics,
    })
}
