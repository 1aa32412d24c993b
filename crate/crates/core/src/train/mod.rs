//! Splits, negative sampling, the full-batch training loop with early
//! stopping, and evaluation metrics.

mod dataset;
mod metrics;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::espf::FeatureMatrix;
use crate::metapath::NeighborGraph;
use crate::model::{HanModel, ModelConfig, ModelInputs, ModelParams, Variant, BCE_CLAMP};
use crate::rng::{stream_rng, Stream};
use crate::tensor::{bce_sum, AdamConfig, AdamState, Real, Tape};

pub use dataset::{
    held_out_count, sample_negatives, sample_negatives_where, split_cold_start, split_edges,
    LabeledPair, Protocol, SplitBundle,
};
pub use metrics::{auroc, evaluate, Metrics};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub patience: usize,
    /// Train pairs per optimizer step; 0 means the whole train set.
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Seeds the dropout stream.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            patience: 100,
            batch_size: 0,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean BCE over train pairs, with dropout active.
    pub train_loss: f64,
    /// Mean BCE over the monitored pairs in eval mode.
    pub val_loss: f64,
    pub val_auroc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were restored (1-based).
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub early_stopped: bool,
}

impl TrainHistory {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\ttrain_loss\tval_loss\tval_auroc\n");
        for r in &self.records {
            let auroc = r.val_auroc.map_or("NA".to_string(), |a| format!("{a:.6}"));
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{auroc}\n",
                r.epoch, r.train_loss, r.val_loss
            ));
        }
        out
    }
}

fn pairs_and_labels<T: Real>(pairs: &[LabeledPair]) -> (Vec<(usize, usize)>, Vec<T>) {
    pairs
        .iter()
        .map(|p| ((p.i, p.j), if p.label { T::one() } else { T::zero() }))
        .unzip()
}

fn diverged(epoch: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite { op } => Error::Diverged {
            epoch,
            message: format!("non-finite value in {op}"),
        },
        other => other,
    }
}

/// Eval-mode scores (as `f64`) and labels for `pairs`.
pub fn score_labeled<T: Real>(
    model: &HanModel<T>,
    inputs: &ModelInputs<T>,
    pairs: &[LabeledPair],
) -> Result<(Vec<f64>, Vec<bool>)> {
    let keys: Vec<(usize, usize)> = pairs.iter().map(|p| (p.i, p.j)).collect();
    let scores = model.score_pairs(inputs, &keys)?;
    Ok((
        scores.into_iter().map(Real::as_f64).collect(),
        pairs.iter().map(|p| p.label).collect(),
    ))
}

pub fn evaluate_pairs<T: Real>(
    model: &HanModel<T>,
    inputs: &ModelInputs<T>,
    pairs: &[LabeledPair],
    threshold: f64,
) -> Result<Metrics> {
    let (scores, labels) = score_labeled(model, inputs, pairs)?;
    evaluate(&scores, &labels, threshold)
}

/// Adam on the train pairs, full-batch unless `batch_size` is set. After each epoch the validation pairs
/// (the train pairs when there are none) are scored in eval mode; training
/// stops once the monitored loss has not improved for `patience` epochs
/// (at least one), and the best epoch's parameters are restored.
pub fn train<T: Real>(
    model: &mut HanModel<T>,
    inputs: &ModelInputs<T>,
    bundle: &SplitBundle,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    if bundle.train.is_empty() {
        return Err(Error::Parameter("training set is empty".into()));
    }
    if cfg.epochs == 0 {
        return Err(Error::Parameter("epochs must be at least 1".into()));
    }
    let (train_pairs, train_labels) = pairs_and_labels::<T>(&bundle.train);
    let monitored = if bundle.validation.is_empty() {
        &bundle.train
    } else {
        &bundle.validation
    };
    let monitored_labels: Vec<f64> = monitored
        .iter()
        .map(|p| if p.label { 1.0 } else { 0.0 })
        .collect();

    let mut adam = AdamState::new(cfg.adam, model.params().tensors());
    let mut dropout_rng = stream_rng(cfg.seed, Stream::Dropout);
    let mut batch_rng = stream_rng(cfg.seed, Stream::Batch);
    let clamp = T::lit(BCE_CLAMP);
    let full_batch = cfg.batch_size == 0 || cfg.batch_size >= train_pairs.len();
    let mut order: Vec<usize> = (0..train_pairs.len()).collect();

    let mut records = Vec::new();
    let mut best: Option<(f64, usize, ModelParams<T>)> = None;
    let mut early_stopped = false;
    for epoch in 1..=cfg.epochs {
        let on_err = diverged(epoch);
        let chunk = if full_batch {
            train_pairs.len()
        } else {
            order.shuffle(&mut batch_rng);
            cfg.batch_size
        };
        let mut loss_sum = 0.0;
        for batch in order.chunks(chunk) {
            let pairs: Vec<(usize, usize)> = batch.iter().map(|&k| train_pairs[k]).collect();
            let labels: Vec<T> = batch.iter().map(|&k| train_labels[k]).collect();
            let mut tape = Tape::new();
            let fwd = model
                .record(&mut tape, inputs, &pairs, true, &mut dropout_rng)
                .map_err(&on_err)?;
            let scores = fwd.scores.expect("batches are non-empty");
            let loss = tape.bce(scores, &labels, clamp).map_err(&on_err)?;
            loss_sum += tape.value(loss).data()[0].as_f64();
            let grads_all = tape.backward(loss).map_err(&on_err)?;
            let grads: Vec<_> = fwd.params.iter().map(|&p| grads_all.wrt(p)).collect();
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    message: "non-finite gradient".into(),
                });
            }
            adam.step(&mut model.params_mut().tensors_mut(), &grads)?;
            if model.params().tensors().iter().any(|t| !t.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    message: "non-finite parameter after update".into(),
                });
            }
        }
        let train_loss = loss_sum / train_pairs.len() as f64;

        let (val_scores, val_labels) = score_labeled(model, inputs, monitored).map_err(&on_err)?;
        let val_loss = bce_sum(&val_scores, &monitored_labels, BCE_CLAMP) / monitored.len() as f64;
        if !val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                message: "non-finite validation loss".into(),
            });
        }
        let val_auroc = auroc(&val_scores, &val_labels).ok();
        records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_auroc,
        });

        match &best {
            Some((best_loss, best_epoch, _)) if val_loss >= *best_loss => {
                if epoch - best_epoch >= cfg.patience.max(1) {
                    early_stopped = true;
                    break;
                }
            }
            _ => best = Some((val_loss, epoch, model.params().clone())),
        }
    }
    let stopped_epoch = records.len();
    let (_, best_epoch, params) = best.expect("at least one epoch ran");
    *model.params_mut() = params;
    Ok(TrainHistory {
        records,
        best_epoch,
        stopped_epoch,
        early_stopped,
    })
}

/// A trained model with its history and per-partition metrics.
#[derive(Clone, Debug)]
pub struct Experiment<T> {
    pub model: HanModel<T>,
    pub history: TrainHistory,
    pub train: Metrics,
    pub validation: Option<Metrics>,
    pub test: Option<Metrics>,
}

/// Initializes a model of `variant`, trains it on `bundle` and evaluates
/// every non-empty partition.
pub fn run_experiment<T: Real>(
    model_cfg: &ModelConfig,
    graphs: &[NeighborGraph],
    features: &FeatureMatrix,
    bundle: &SplitBundle,
    train_cfg: &TrainConfig,
    variant: Variant,
) -> Result<Experiment<T>> {
    let inputs = ModelInputs::<T>::new(features, graphs)?;
    let names = graphs.iter().map(|g| g.name.clone()).collect();
    let mut model = HanModel::new(model_cfg.clone(), names, variant, graphs)?;
    let history = train(&mut model, &inputs, bundle, train_cfg)?;
    let eval = |pairs: &[LabeledPair]| -> Result<Option<Metrics>> {
        if pairs.is_empty() {
            Ok(None)
        } else {
            evaluate_pairs(&model, &inputs, pairs, DEFAULT_THRESHOLD).map(Some)
        }
    };
    let train_metrics = eval(&bundle.train)?.expect("train set is non-empty");
    let validation = eval(&bundle.validation)?;
    let test = eval(&bundle.test)?;
    Ok(Experiment {
        model,
        history,
        train: train_metrics,
        validation,
        test,
    })
}

/// [`run_experiment`] with one attention level fixed.
pub fn ablate<T: Real>(
    variant: Variant,
    model_cfg: &ModelConfig,
    graphs: &[NeighborGraph],
    features: &FeatureMatrix,
    bundle: &SplitBundle,
    train_cfg: &TrainConfig,
) -> Result<Experiment<T>> {
    if variant == Variant::Full {
        return Err(Error::Parameter("ablation needs variant mp or n".into()));
    }
    run_experiment(model_cfg, graphs, features, bundle, train_cfg, variant)
}
