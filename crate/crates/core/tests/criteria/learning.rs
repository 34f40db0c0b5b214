use std::path::Path;

use ser_core::model::{build_model, ModelConfig};
use ser_core::train::{evaluate_loss, train_model, TrainConfig};

use super::fixtures::separable_set;
use super::Outcome;
use crate::ensure;

/// 20 linearly separable samples; train accuracy must reach 1.0 within 30 epochs.
pub fn separable_convergence() -> Result<Outcome, String> {
    let shape = [1, 16, 32];
    let set = separable_set(20, shape, 21);
    let mut cfg = ModelConfig::for_input(1, 16, 32, 2);
    cfg.seed = 1;
    let mut model = build_model::<f32>(&cfg).map_err(|e| e.to_string())?;
    let tc = TrainConfig {
        max_epochs: 30,
        early_stop_patience: 30,
        seed: 2,
        ..TrainConfig::default()
    };
    // the training set doubles as the monitored set, so val_acc is train accuracy
    let h = train_model(&mut model, &set, &set, &tc).map_err(|e| e.to_string())?;
    let first = h.epochs.iter().find(|e| e.val_acc == 1.0).map(|e| e.epoch);
    ensure!(first.is_some(), "train accuracy peaked at {:.3}", h.epochs.iter().map(|e| e.val_acc).fold(0.0, f64::max));
    let (_, acc, _) = evaluate_loss(&mut model, &set, 32).map_err(|e| e.to_string())?;
    ensure!(acc == 1.0, "restored model train accuracy {acc}");
    Ok(Outcome::Pass(format!("train accuracy 1.0 at epoch {}", first.unwrap())))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let mut full = vec!["ser"];
    full.extend_from_slice(args);
    match ser_core::cli::main_with_args(full.iter().map(|s| s.to_string())) {
        0 => Ok(()),
        code => Err(format!("`ser {}` exited with {code}", args.join(" "))),
    }
}

/// Parses a history CSV into (train_loss, val_loss) rows.
pub fn read_history(path: &Path) -> Result<Vec<(f64, f64)>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    ensure!(lines.next() == Some("epoch,train_loss,val_loss,val_acc,lr"), "bad header in {}", path.display());
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let num = |i: usize| f.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or(format!("bad row '{l}'"));
            Ok((num(1)?, num(2)?))
        })
        .collect()
}

/// 100 synthetic clips through scan, extract and 2-fold crossval (LMS, 20
/// epochs) via the command-line entry point.
pub fn smoke_end_to_end() -> Result<Outcome, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let corpus = root.join("corpus");
    ser_core::synth::write_emodb_corpus(&corpus, 100, 3, 1.0).map_err(|e| e.to_string())?;
    let manifest = root.join("manifest.csv");
    let cache = root.join("cache");
    let out = root.join("run");
    let s = |p: &Path| p.display().to_string();
    cli(&["scan", "--root", &s(&corpus), "--dataset", "emodb", "--out", &s(&manifest)])?;
    cli(&["extract", "--manifest", &s(&manifest), "--feature", "lms", "--cache", &s(&cache)])?;
    cli(&[
        "crossval", "--manifest", &s(&manifest), "--feature", "lms", "--cache", &s(&cache),
        "--out", &s(&out), "--k", "2",
        "--set", "run.seed=5",
        "--set", "train.max_epochs=20",
        "--set", "train.early_stop_patience=20",
    ])?;
    let mut ratios = Vec::new();
    for fold in 0..2 {
        let rows = read_history(&out.join(format!("fold{fold}.history.csv")))?;
        ensure!(rows.len() == 20, "fold {fold} ran {} epochs", rows.len());
        ensure!(rows.iter().all(|r| r.1.is_finite()), "fold {fold}: non-finite validation loss");
        let (initial, last) = (rows[0].0, rows[rows.len() - 1].0);
        ensure!(last < 0.5 * initial, "fold {fold}: final train loss {last:.4} not below half of {initial:.4}");
        ratios.push(last / initial);
    }
    ensure!(out.join("metrics.json").exists(), "no metrics.json");
    Ok(Outcome::Pass(format!(
        "train loss ratio final/initial per fold {:.1e}, {:.1e}; validation loss finite throughout",
        ratios[0], ratios[1]
    )))
}
