use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ser_core::eval::{accuracy, confusion_matrix, f1, micro_recall, precision, recall, MetricsReport};

use super::Outcome;
use crate::ensure;

/// Metrics recounted sample by sample: (accuracy, precision, recall, f1).
pub fn brute_force(preds: &[usize], labels: &[usize], classes: usize) -> (f64, f64, f64, f64) {
    let n = preds.len() as f64;
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count() as f64;
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for c in 0..classes {
        let tp = preds.iter().zip(labels).filter(|&(&p, &l)| p == c && l == c).count() as f64;
        let predicted = preds.iter().filter(|&&p| p == c).count() as f64;
        let actual = labels.iter().filter(|&&l| l == c).count() as f64;
        let p = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let r = if actual > 0.0 { tp / actual } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        p_sum += p;
        r_sum += r;
        f_sum += f;
    }
    let k = classes as f64;
    (correct / n, p_sum / k, r_sum / k, f_sum / k)
}

pub fn check() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let classes = rng.random_range(2..10);
        let n = rng.random_range(1..400);
        // bias predictions toward the label so every regime shows up
        let skill = rng.random_range(0.0..1.0);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let preds: Vec<usize> = labels
            .iter()
            .map(|&l| if rng.random_bool(skill) { l } else { rng.random_range(0..classes) })
            .collect();
        let cm = confusion_matrix(&preds, &labels, classes).map_err(|e| e.to_string())?;
        let (a, p, r, f) = brute_force(&preds, &labels, classes);
        let got = [
            accuracy(&cm).map_err(|e| e.to_string())?,
            precision(&cm).map_err(|e| e.to_string())?,
            recall(&cm).map_err(|e| e.to_string())?,
            f1(&cm).map_err(|e| e.to_string())?,
        ];
        for (name, g, w) in [("accuracy", got[0], a), ("precision", got[1], p), ("recall", got[2], r), ("f1", got[3], f)] {
            let e = (g - w).abs();
            ensure!(e <= 1e-12, "case {case}: {name} {g} vs tally {w}");
            worst = worst.max(e);
        }
        let mr = micro_recall(&cm).map_err(|e| e.to_string())?;
        ensure!((mr - got[0]).abs() <= 1e-15, "case {case}: micro recall {mr} != accuracy {}", got[0]);
        let report = MetricsReport::from_confusion(cm).map_err(|e| e.to_string())?;
        ensure!(report.averaging == "macro", "report averaging {}", report.averaging);
    }
    // binary worked example [[8,2],[3,7]]
    let mut labels = vec![0; 10];
    labels.extend(vec![1; 10]);
    let mut preds = vec![0; 8];
    preds.extend(vec![1; 2]);
    preds.extend(vec![0; 3]);
    preds.extend(vec![1; 7]);
    let cm = confusion_matrix(&preds, &labels, 2).map_err(|e| e.to_string())?;
    ensure!(cm.counts == vec![vec![8, 2], vec![3, 7]], "worked example matrix {:?}", cm.counts);
    let p = precision(&cm).map_err(|e| e.to_string())?;
    ensure!((p - (8.0 / 11.0 + 7.0 / 9.0) / 2.0).abs() <= 1e-15, "worked example precision {p}");
    Ok(Outcome::Pass(format!("100 random sets, worst deviation {worst:.1e}; accuracy = micro recall")))
}
