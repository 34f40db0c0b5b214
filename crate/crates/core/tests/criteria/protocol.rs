use std::collections::BTreeSet;

use ser_core::audio_io::kfold_partitions;
use ser_core::model::build_model;
use ser_core::train::{
    best_epoch, early_stopping, evaluate_loss, reduce_lr_on_plateau, train_model, PlateauScheduler,
    StopDecision, TrainConfig,
};

use super::fixtures::{emodb_like_records, separable_set, tiny_model};
use super::Outcome;
use crate::ensure;

/// Learning rate after each epoch of a flat history, written out by hand:
/// the first epoch sets the best loss, every `patience` further epochs halve.
fn flat_schedule(epochs: usize, lr0: f64, patience: usize, min_lr: f64) -> Vec<f64> {
    (1..=epochs)
        .map(|e| {
            let cuts = (e - 1) / patience;
            (lr0 * 0.5f64.powi(cuts as i32)).max(min_lr)
        })
        .collect()
}

pub fn plateau_clamp() -> Result<String, String> {
    let (lr0, min_lr) = (0.001, 0.00001);
    let want = flat_schedule(60, lr0, 5, min_lr);
    let mut s = PlateauScheduler::new(0.5, 5, 1e-4, min_lr);
    let mut lr = lr0;
    for (e, w) in want.iter().enumerate() {
        lr = s.step(0.7, lr);
        ensure!(lr == *w, "epoch {}: lr {lr} expected {w}", e + 1);
    }
    ensure!(lr == 0.00001, "final lr {lr} is not exactly 0.00001");
    let first = want.iter().position(|&l| l == min_lr).map(|i| i + 1);
    ensure!(first == Some(36), "floor reached at epoch {first:?}, expected 36");
    let replay = reduce_lr_on_plateau(&[0.7; 500], lr0, 0.5, 5, min_lr);
    ensure!(replay == 0.00001, "500 flat epochs give {replay}");
    Ok("lr floor exactly 0.00001 from epoch 36".into())
}

pub fn early_stop_restores() -> Result<String, String> {
    // ties: the earliest minimum wins
    let losses = [1.0, 0.6, 0.8, 0.6, 0.9, 0.95, 0.99];
    ensure!(best_epoch(&losses) == Some(2), "best epoch {:?}", best_epoch(&losses));
    ensure!(
        early_stopping(&losses, 5) == StopDecision::StopAndRestore { best_epoch: 2 },
        "stop decision {:?}",
        early_stopping(&losses, 5)
    );
    ensure!(early_stopping(&losses[..6], 5) == StopDecision::Continue, "stopped one epoch early");

    // the trained model holds the weights of its best validation epoch
    let train = separable_set(24, [1, 16, 16], 5);
    let val = separable_set(10, [1, 16, 16], 6);
    let mut model = build_model::<f32>(&tiny_model(2, 3)).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        max_epochs: 25,
        early_stop_patience: 4,
        lr: 0.01,
        batch_size: 6,
        ..TrainConfig::default()
    };
    let h = train_model(&mut model, &train, &val, &cfg).map_err(|e| e.to_string())?;
    let losses = h.val_losses();
    let earliest_min = best_epoch(&losses);
    ensure!(h.best_epoch == earliest_min, "restored {:?}, earliest minimum {earliest_min:?}", h.best_epoch);
    let (restored, _, _) = evaluate_loss(&mut model, &val, 32).map_err(|e| e.to_string())?;
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    ensure!((restored - min).abs() <= 1e-7, "restored val loss {restored} vs recorded minimum {min}");
    Ok(format!(
        "restored epoch {} of {} (stopped early: {})",
        h.best_epoch.unwrap_or(0),
        losses.len(),
        h.stopped_early
    ))
}

pub fn folds_partition() -> Result<String, String> {
    let records = emodb_like_records();
    for seed in [0u64, 7, 42] {
        let plans = kfold_partitions(&records, 5, seed).map_err(|e| e.to_string())?;
        ensure!(plans.len() == 5, "{} folds", plans.len());
        let mut seen = BTreeSet::new();
        for (f, p) in plans.iter().enumerate() {
            for &i in &p.test {
                ensure!(seen.insert(i), "seed {seed}: record {i} in two test folds (fold {f})");
            }
            let all: BTreeSet<usize> = p.train.iter().chain(&p.validation).chain(&p.test).copied().collect();
            ensure!(all.len() == records.len() && p.len() == records.len(), "fold {f} does not cover once");
        }
        ensure!(seen.len() == records.len(), "test folds cover {} of {}", seen.len(), records.len());
        ensure!(plans == kfold_partitions(&records, 5, seed).map_err(|e| e.to_string())?, "partitions not seeded");
    }
    Ok(format!("5 folds over {} records, disjoint and covering", records.len()))
}

pub fn seeded_reruns() -> Result<String, String> {
    let train = separable_set(20, [1, 16, 16], 9);
    let val = separable_set(8, [1, 16, 16], 10);
    let cfg = TrainConfig {
        max_epochs: 4,
        seed: 77,
        ..TrainConfig::default()
    };
    let run = || -> Result<_, String> {
        let mut m = build_model::<f32>(&tiny_model(2, 12)).map_err(|e| e.to_string())?;
        let h = train_model(&mut m, &train, &val, &cfg).map_err(|e| e.to_string())?;
        let bits: Vec<u32> = m.state().iter().flat_map(|s| s.tensor.data().iter().map(|v| v.to_bits())).collect();
        Ok((h, bits))
    };
    let (h1, w1) = run()?;
    let (h2, w2) = run()?;
    ensure!(h1 == h2, "histories differ between seeded reruns");
    ensure!(w1 == w2, "weights differ between seeded reruns");
    Ok(format!("{} weights bit-identical", w1.len()))
}

pub fn check() -> Result<Outcome, String> {
    let parts = [plateau_clamp()?, early_stop_restores()?, folds_partition()?, seeded_reruns()?];
    Ok(Outcome::Pass(parts.join("; ")))
}
