use proptest::prelude::*;
use ser_core::audio_io::kfold_partitions;
use ser_core::dsp::{fix_length, standardize};
use ser_core::eval::{confusion_matrix, micro_recall, MetricsReport};
use ser_core::train::{adam_step, best_epoch, early_stopping, AdamHyper, AdamState, PlateauScheduler, StopDecision};
use ser_core::{Dataset, FeatureKind, FeatureTensor, Gender, UtteranceRecord};

fn records(counts: &[usize]) -> Vec<UtteranceRecord> {
    let emotions = Dataset::Emodb.emotions();
    let mut out = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        for i in 0..n {
            out.push(UtteranceRecord {
                clip_path: format!("{c}/{i}.wav"),
                dataset: Dataset::Emodb,
                emotion: emotions[c],
                gender: if i % 2 == 0 { Gender::Male } else { Gender::Female },
                speaker_id: format!("{:02}", i % 10),
            });
        }
    }
    out
}

proptest! {
    #[test]
    fn plateau_lr_never_rises_or_undershoots(
        losses in prop::collection::vec(0.0f64..3.0, 1..80),
        patience in 1usize..6,
        factor in 0.1f64..0.9,
    ) {
        let min_lr = 1e-5;
        let mut s = PlateauScheduler::new(factor, patience, 1e-4, min_lr);
        let mut lr = 1e-3;
        for l in losses {
            let next = s.step(l, lr);
            prop_assert!(next <= lr);
            prop_assert!(next >= min_lr);
            lr = next;
        }
    }

    #[test]
    fn early_stop_restores_the_minimum(losses in prop::collection::vec(0.0f64..3.0, 1..60), patience in 1usize..10) {
        let best = best_epoch(&losses).unwrap();
        let min = losses.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(losses[best - 1], min);
        prop_assert!(losses[..best - 1].iter().all(|&l| l > min));
        match early_stopping(&losses, patience) {
            StopDecision::StopAndRestore { best_epoch: b } => {
                prop_assert_eq!(b, best);
                prop_assert!(losses.len() - best >= patience);
            }
            StopDecision::Continue => prop_assert!(losses.len() - best < patience),
        }
    }

    #[test]
    fn metrics_bounded_and_label_permutation_invariant(
        pairs in prop::collection::vec((0usize..5, 0usize..5), 1..200),
        shift in 1usize..5,
    ) {
        let (pred, label): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let names: Vec<String> = (0..5).map(|c| c.to_string()).collect();
        let r = MetricsReport::evaluate(&pred, &label, &names).unwrap();
        for v in [r.accuracy, r.precision, r.recall, r.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let cm = confusion_matrix(&pred, &label, 5).unwrap();
        prop_assert!((micro_recall(&cm).unwrap() - r.accuracy).abs() < 1e-12);

        let relabel = |v: &[usize]| v.iter().map(|&c| (c + shift) % 5).collect::<Vec<_>>();
        let p = MetricsReport::evaluate(&relabel(&pred), &relabel(&label), &names).unwrap();
        prop_assert!((p.accuracy - r.accuracy).abs() < 1e-12);
        prop_assert!((p.precision - r.precision).abs() < 1e-12);
        prop_assert!((p.recall - r.recall).abs() < 1e-12);
        prop_assert!((p.f1 - r.f1).abs() < 1e-12);
    }

    #[test]
    fn first_adam_step_is_bounded_by_lr(grad in prop::collection::vec(-100.0f64..100.0, 1..50), lr in 1e-5f64..1e-1) {
        let mut theta = vec![0.0; grad.len()];
        let mut state = AdamState::new(grad.len());
        adam_step(&mut theta, &grad, &mut state, lr, AdamHyper::default()).unwrap();
        for (t, g) in theta.iter().zip(&grad) {
            prop_assert!(t.abs() <= lr * (1.0 + 1e-12));
            if *g != 0.0 {
                prop_assert!(t.signum() == -g.signum());
            }
        }
    }

    #[test]
    fn kfold_tests_partition_the_records(counts in prop::collection::vec(5usize..40, 2..7), k in 2usize..6, seed in any::<u64>()) {
        let recs = records(&counts);
        let folds = kfold_partitions(&recs, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = vec![0usize; recs.len()];
        for f in &folds {
            for &i in &f.test {
                seen[i] += 1;
            }
            let mut all: Vec<usize> = f.train.iter().chain(&f.validation).chain(&f.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..recs.len()).collect::<Vec<_>>());
        }
        prop_assert!(seen.iter().all(|&n| n == 1));
    }

    #[test]
    fn standardized_blocks_have_zero_mean_unit_std(values in prop::collection::vec(-50.0f64..50.0, 2..300)) {
        let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - values.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let z = standardize(&values);
        let n = z.len() as f64;
        let mean = z.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = z.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-5);
        prop_assert!((var.sqrt() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn fix_length_keeps_a_centered_window(height in 1usize..6, frames in 1usize..60, target in 1usize..60) {
        let t = FeatureTensor {
            channels: 1,
            height,
            frames,
            layout: FeatureKind::Lms,
            values: (0..height * frames).map(|i| i as f32 + 1.0).collect(),
        };
        let f = fix_length(&t, target);
        prop_assert_eq!(f.dims(), (1, height, target));
        let kept = frames.min(target);
        for h in 0..height {
            let nonzero: Vec<f32> = (0..target).map(|x| f.get(0, h, x)).filter(|&v| v != 0.0).collect();
            prop_assert_eq!(nonzero.len(), kept);
            let start = (frames - kept) / 2;
            let expect: Vec<f32> = (start..start + kept).map(|x| t.get(0, h, x)).collect();
            prop_assert_eq!(nonzero, expect);
        }
    }
}
