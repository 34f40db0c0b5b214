//! Adam training with plateau LR reduction, early stopping with best-weight
//! restore, and k-fold orchestration.

mod crossval;
mod optim;
mod schedule;

pub use crossval::{
    gather_set, run_crossval, CrossvalConfig, CrossvalResult, FeatureSource, FoldResult, TaggedFeature,
};
pub use optim::{adam_step, clip_grad_norm, Adam, AdamHyper, AdamState};
pub use schedule::{best_epoch, early_stopping, reduce_lr_on_plateau, PlateauScheduler, StopDecision};

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config_file::{ConfigDoc, ConfigError};
use crate::dsp::FeatureTensor;
use crate::model::{argmax_rows, Model, ModelError};
use crate::nn::{softmax_cross_entropy, Mode, NnError, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("bad training config: {0}")]
    BadConfig(String),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("dataset problem: {0}")]
    Data(String),
    #[error("provenance violation: {0}")]
    Provenance(String),
    #[error("fold {fold}: {message}")]
    Fold { fold: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<NnError> for TrainError {
    fn from(e: NnError) -> Self {
        TrainError::Model(ModelError::Nn(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub min_lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub plateau_min_delta: f64,
    pub early_stop_patience: usize,
    /// Global gradient-norm clip; off unless set.
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            min_lr: 0.00001,
            batch_size: 10,
            max_epochs: 150,
            plateau_factor: 0.5,
            plateau_patience: 5,
            plateau_min_delta: 1e-4,
            early_stop_patience: 15,
            grad_clip: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::BadConfig(m));
        if !(self.min_lr > 0.0 && self.min_lr <= self.lr) {
            return bad(format!("need 0 < min_lr <= lr, got {} and {}", self.min_lr, self.lr));
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if self.plateau_patience < 1 || self.early_stop_patience < 1 {
            return bad("patience values must be >= 1".into());
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad(format!("plateau_factor {} not in (0, 1)", self.plateau_factor));
        }
        if self.grad_clip.is_some_and(|c| c <= 0.0) {
            return bad("grad_clip must be positive".into());
        }
        Ok(())
    }

    pub const KEYS: [&'static str; 10] = [
        "lr",
        "min_lr",
        "batch_size",
        "max_epochs",
        "plateau_factor",
        "plateau_patience",
        "plateau_min_delta",
        "early_stop_patience",
        "grad_clip",
        "seed",
    ];

    /// Reads the `[train]` section, starting from the defaults.
    pub fn from_doc(doc: &ConfigDoc) -> Result<Self, ConfigError> {
        let s = "train";
        doc.check_keys(s, &Self::KEYS)?;
        let d = Self::default();
        let grad_clip = match doc.get::<String>(s, "grad_clip")? {
            None => None,
            Some(v) if v == "none" || v == "off" => None,
            Some(v) => Some(
                v.parse::<f64>()
                    .map_err(|e| doc.bad_value(s, "grad_clip", e.to_string()))?,
            ),
        };
        let cfg = Self {
            lr: doc.get_or(s, "lr", d.lr)?,
            min_lr: doc.get_or(s, "min_lr", d.min_lr)?,
            batch_size: doc.get_or(s, "batch_size", d.batch_size)?,
            max_epochs: doc.get_or(s, "max_epochs", d.max_epochs)?,
            plateau_factor: doc.get_or(s, "plateau_factor", d.plateau_factor)?,
            plateau_patience: doc.get_or(s, "plateau_patience", d.plateau_patience)?,
            plateau_min_delta: doc.get_or(s, "plateau_min_delta", d.plateau_min_delta)?,
            early_stop_patience: doc.get_or(s, "early_stop_patience", d.early_stop_patience)?,
            grad_clip,
            seed: doc.get_or(s, "seed", d.seed)?,
        };
        cfg.validate()
            .map_err(|e| ConfigError::Invalid(format!("{}: {e}", doc.origin)))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights were restored; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn val_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.val_loss).collect()
    }

    pub fn best_val_loss(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.epochs[e - 1].val_loss)
    }

    /// `epoch,train_loss,val_loss,val_acc,lr`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_acc,lr\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.epoch, e.train_loss, e.val_loss, e.val_acc, e.lr
            );
        }
        out
    }
}

/// Uniformly shaped feature samples with integer labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSet {
    /// Per-sample `[C, H, W]`.
    pub shape: [usize; 3],
    pub values: Vec<f32>,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    pub fn new(shape: [usize; 3]) -> Self {
        Self {
            shape,
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn from_features(features: &[FeatureTensor], labels: &[usize]) -> Result<Self, TrainError> {
        if features.len() != labels.len() {
            return Err(TrainError::Data(format!(
                "{} features but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let first = features
            .first()
            .map_or((0, 0, 0), |f| (f.channels, f.height, f.frames));
        let mut set = Self::new([first.0, first.1, first.2]);
        for (f, &l) in features.iter().zip(labels) {
            set.push(f.dims(), &f.values, l)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, dims: (usize, usize, usize), values: &[f32], label: usize) -> Result<(), TrainError> {
        if [dims.0, dims.1, dims.2] != self.shape || values.len() != self.sample_len() {
            return Err(TrainError::Data(format!(
                "feature shape {dims:?} differs from {:?}",
                self.shape
            )));
        }
        self.values.extend_from_slice(values);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn batch<T: Scalar>(&self, idx: &[usize]) -> (Tensor<T>, Vec<usize>) {
        let per = self.sample_len();
        let mut data = Vec::with_capacity(idx.len() * per);
        for &i in idx {
            data.extend(self.values[i * per..(i + 1) * per].iter().map(|&v| T::lit(v as f64)));
        }
        let [c, h, w] = self.shape;
        let x = Tensor::from_vec(&[idx.len(), c, h, w], data).expect("batch shape");
        (x, idx.iter().map(|&i| self.labels[i]).collect())
    }
}

/// Mean cross-entropy and accuracy in inference mode.
pub fn evaluate_loss<T: Scalar>(
    model: &mut Model<T>,
    set: &LabeledSet,
    chunk: usize,
) -> Result<(f64, f64, Vec<usize>), TrainError> {
    if set.is_empty() {
        return Err(TrainError::Data("evaluation set is empty".into()));
    }
    let mut total = 0.0;
    let mut preds = Vec::with_capacity(set.len());
    let all: Vec<usize> = (0..set.len()).collect();
    for part in all.chunks(chunk.max(1)) {
        let (x, y) = set.batch::<T>(part);
        let logits = model.forward(&x, Mode::Infer)?;
        let ce = softmax_cross_entropy(&logits, &y)?;
        total += ce.loss.to_f64_lossy() * part.len() as f64;
        preds.extend(argmax_rows(&ce.probs));
    }
    model.clear_cache();
    let correct = preds.iter().zip(&set.labels).filter(|(p, l)| p == l).count();
    Ok((total / set.len() as f64, correct as f64 / set.len() as f64, preds))
}

/// Trains in place and leaves `model` holding the weights of the best epoch.
pub fn train_model<T: Scalar>(
    model: &mut Model<T>,
    train: &LabeledSet,
    val: &LabeledSet,
    cfg: &TrainConfig,
) -> Result<TrainHistory, TrainError> {
    cfg.validate()?;
    let mut history = TrainHistory::default();
    if cfg.max_epochs == 0 {
        return Ok(history);
    }
    if train.len() < 2 {
        return Err(TrainError::Data(format!(
            "need at least 2 training samples, got {}",
            train.len()
        )));
    }
    if val.is_empty() {
        return Err(TrainError::Data("validation set is empty".into()));
    }
    if let Some(&l) = train.labels.iter().chain(&val.labels).find(|&&l| l >= model.n_classes) {
        return Err(TrainError::Data(format!(
            "label {l} out of range for {} classes",
            model.n_classes
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    model.reseed_dropout(cfg.seed ^ 0xd50f_0001);
    let mut adam = Adam::new(AdamHyper::default());
    let mut plateau = PlateauScheduler::new(
        cfg.plateau_factor,
        cfg.plateau_patience,
        cfg.plateau_min_delta,
        cfg.min_lr,
    );
    let mut lr = cfg.lr;
    let mut best_state = model.state();
    let mut best_loss = f64::INFINITY;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            if idx.len() < 2 {
                continue;
            }
            let (x, y) = train.batch::<T>(idx);
            model.zero_grad();
            let logits = model.forward(&x, Mode::Train)?;
            let ce = softmax_cross_entropy(&logits, &y)?;
            let loss = ce.loss.to_f64_lossy();
            if !loss.is_finite() {
                log::error!("non-finite loss at epoch {epoch}, batch {}: {loss}", b + 1);
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: b + 1,
                    loss,
                });
            }
            model.backward(&ce.grad)?;
            if let Some(c) = cfg.grad_clip {
                clip_grad_norm(model.params_mut(), c);
            }
            adam.step(model.params_mut(), lr)?;
            loss_sum += loss * idx.len() as f64;
            seen += idx.len();
        }
        model.clear_cache();
        let train_loss = loss_sum / seen.max(1) as f64;
        let (val_loss, val_acc, _) = evaluate_loss(model, val, 32)?;
        if !val_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                batch: 0,
                loss: val_loss,
            });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_acc,
            lr,
        });
        log::debug!(
            "epoch {epoch}: train_loss={train_loss:.5} val_loss={val_loss:.5} val_acc={val_acc:.4} lr={lr:e}"
        );
        if val_loss < best_loss {
            best_loss = val_loss;
            best_state = model.state();
            history.best_epoch = Some(epoch);
        }
        lr = plateau.step(val_loss, lr);
        if let StopDecision::StopAndRestore { .. } =
            early_stopping(&history.val_losses(), cfg.early_stop_patience)
        {
            history.stopped_early = true;
            break;
        }
    }
    model.load_state(&best_state)?;
    Ok(history)
}
