use rayon::prelude::*;

use crate::audio_io::{kfold_partitions, SplitPlan, UtteranceRecord};
use crate::dsp::FeatureTensor;
use crate::error::Error;
use crate::eval::{AggregateReport, MetricsReport};
use crate::model::{build_model, ModelConfig};
use crate::nn::StateEntry;
use crate::preprocess::Variant;

use super::{evaluate_loss, train_model, LabeledSet, TrainConfig, TrainError, TrainHistory};

/// A feature tensor with the record and augmentation variant it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedFeature {
    pub record: usize,
    pub variant: Variant,
    pub tensor: FeatureTensor,
}

/// Supplies features for records by index.
pub trait FeatureSource: Sync {
    /// Un-augmented features of one record.
    fn clean(&self, record: usize) -> Result<TaggedFeature, Error>;
    /// Augmented variants of one record, excluding the clean one.
    fn augmented(&self, record: usize) -> Result<Vec<TaggedFeature>, Error>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalConfig {
    pub k: usize,
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Add augmented variants to each fold's training split.
    pub augment: bool,
    pub parallel_folds: bool,
    pub method: String,
    pub feature: String,
    pub dataset: String,
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub plan: SplitPlan,
    pub report: MetricsReport,
    pub history: TrainHistory,
    pub test_loss: f64,
    pub weights: Vec<StateEntry<f32>>,
}

#[derive(Debug, Clone)]
pub struct CrossvalResult {
    pub folds: Vec<FoldResult>,
    pub aggregate: AggregateReport,
}

fn check_clean(f: &TaggedFeature, record: usize) -> Result<(), TrainError> {
    if f.record != record || !f.variant.is_clean() {
        return Err(TrainError::Provenance(format!(
            "evaluation feature for record {record} is tagged record {} variant {}",
            f.record,
            f.variant.label()
        )));
    }
    Ok(())
}

/// Labeled set of the clean features of `idx`, plus their augmented variants
/// when `augment` is set. Checks every feature's provenance tag.
pub fn gather_set(
    source: &dyn FeatureSource,
    idx: &[usize],
    labels: &[usize],
    augment: bool,
    shape: [usize; 3],
) -> Result<LabeledSet, Error> {
    let mut set = LabeledSet::new(shape);
    for &r in idx {
        let clean = source.clean(r)?;
        check_clean(&clean, r)?;
        set.push(clean.tensor.dims(), &clean.tensor.values, labels[r])?;
        if augment {
            for f in source.augmented(r)? {
                if f.record != r || f.variant.is_clean() {
                    return Err(TrainError::Provenance(format!(
                        "augmented feature for record {r} is tagged record {} variant {}",
                        f.record,
                        f.variant.label()
                    ))
                    .into());
                }
                set.push(f.tensor.dims(), &f.tensor.values, labels[r])?;
            }
        }
    }
    Ok(set)
}

fn run_fold(
    fold: usize,
    plan: SplitPlan,
    labels: &[usize],
    class_names: &[String],
    source: &dyn FeatureSource,
    cfg: &CrossvalConfig,
) -> Result<FoldResult, Error> {
    let (c, h, w) = cfg.model.input;
    let shape = [c, h, w];
    let train = gather_set(source, &plan.train, labels, cfg.augment, shape)?;
    let val = gather_set(source, &plan.validation, labels, false, shape)?;
    let test = gather_set(source, &plan.test, labels, false, shape)?;
    log::info!(
        "fold {fold}: train {} (from {} clips), val {}, test {}",
        train.len(),
        plan.train.len(),
        val.len(),
        test.len()
    );
    let mut model_cfg = cfg.model.clone();
    model_cfg.seed = cfg.model.seed.wrapping_add(fold as u64);
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = cfg.train.seed.wrapping_add(fold as u64);
    let mut model = build_model::<f32>(&model_cfg)?;
    let history = train_model(&mut model, &train, &val, &train_cfg)?;
    let (test_loss, _, preds) = evaluate_loss(&mut model, &test, 32)?;
    let report = MetricsReport::evaluate(&preds, &test.labels, class_names)?;
    log::info!(
        "fold {fold}: accuracy {:.4}, macro F1 {:.4}, best epoch {:?}",
        report.accuracy,
        report.f1,
        history.best_epoch
    );
    Ok(FoldResult {
        fold,
        plan,
        report,
        history,
        test_loss,
        weights: model.state(),
    })
}

/// Stratified k-fold: train on each fold's train split (plus augmentation),
/// select weights on its validation split, report on its test split.
pub fn run_crossval(
    records: &[UtteranceRecord],
    labels: &[usize],
    class_names: &[String],
    source: &dyn FeatureSource,
    cfg: &CrossvalConfig,
) -> Result<CrossvalResult, Error> {
    if records.len() != labels.len() {
        return Err(TrainError::Data(format!(
            "{} records but {} labels",
            records.len(),
            labels.len()
        ))
        .into());
    }
    let plans = kfold_partitions(records, cfg.k, cfg.seed)?;
    let wrap = |fold: usize, r: Result<FoldResult, Error>| {
        r.map_err(|e| match e {
            e if e.is_usage() => e,
            e => TrainError::Fold {
                fold,
                message: e.to_string(),
            }
            .into(),
        })
    };
    let folds: Vec<FoldResult> = if cfg.parallel_folds {
        plans
            .into_par_iter()
            .enumerate()
            .map(|(f, p)| wrap(f, run_fold(f, p, labels, class_names, source, cfg)))
            .collect::<Result<_, _>>()?
    } else {
        plans
            .into_iter()
            .enumerate()
            .map(|(f, p)| wrap(f, run_fold(f, p, labels, class_names, source, cfg)))
            .collect::<Result<_, _>>()?
    };
    let reports: Vec<MetricsReport> = folds.iter().map(|f| f.report.clone()).collect();
    let aggregate = AggregateReport::new(&cfg.method, &cfg.feature, &cfg.dataset, &reports)?;
    Ok(CrossvalResult { folds, aggregate })
}
