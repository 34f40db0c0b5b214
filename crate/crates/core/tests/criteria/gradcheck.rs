//! Central finite differences in f64 against the analytic backward pass.
//!
//! Each layer is wrapped in the scalar objective `L = sum(g * layer(x))` for a
//! fixed random `g`. Errors are relative L2 over each gradient tensor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ser_core::model::{build_model, ErfdConfig, LflbConfig, ModelConfig, ResLflbConfig};
use ser_core::nn::{
    softmax_cross_entropy, Activation, ActivationKind, BatchNorm2d, Conv2d, Dense, Layer, Mode,
    Pool2d, PoolKind, Tensor,
};

use super::Outcome;
use crate::ensure;

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
pub const SEEDS: [u64; 3] = [11, 22, 33];
/// Denominator floor. A conv bias feeding batch norm has an exactly zero
/// gradient, and central differences return roundoff of order eps / STEP
/// there, so tensors that small are compared in absolute terms.
pub const FLOOR: f64 = 1e-5;

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    num / norm(a).max(norm(b)).max(FLOOR)
}

/// Random values bounded away from zero so ReLU kinks are never straddled.
fn away_from_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.random_range(0.05..1.5);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

fn objective(layer: &mut Layer<f64>, x: &Tensor<f64>, g: &[f64]) -> Result<f64, String> {
    let y = layer.forward(x, Mode::Train).map_err(|e| e.to_string())?;
    layer.clear_cache();
    Ok(y.data().iter().zip(g).map(|(a, b)| a * b).sum())
}

/// Worst relative error over the input gradient and every parameter gradient.
pub fn check_layer(mut layer: Layer<f64>, in_shape: &[usize], seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = in_shape.iter().product();
    let x = Tensor::from_vec(in_shape, away_from_zero(&mut rng, n)).map_err(|e| e.to_string())?;
    let y = layer.forward(&x, Mode::Train).map_err(|e| e.to_string())?;
    let g: Vec<f64> = (0..y.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    for p in layer.params_mut() {
        p.zero_grad();
    }
    let dy = Tensor::from_vec(y.shape(), g.clone()).map_err(|e| e.to_string())?;
    let dx = layer.backward(&dy).map_err(|e| e.to_string())?;

    let mut num_dx = vec![0.0; n];
    for (i, slot) in num_dx.iter_mut().enumerate() {
        let mut xp = x.clone();
        xp.data_mut()[i] += STEP;
        let mut xm = x.clone();
        xm.data_mut()[i] -= STEP;
        *slot = (objective(&mut layer, &xp, &g)? - objective(&mut layer, &xm, &g)?) / (2.0 * STEP);
    }
    let mut worst = rel_l2(dx.data(), &num_dx);

    let analytic: Vec<Vec<f64>> = layer.params().iter().map(|p| p.grad.data().to_vec()).collect();
    for (pi, a) in analytic.iter().enumerate() {
        let mut num = vec![0.0; a.len()];
        for (j, slot) in num.iter_mut().enumerate() {
            let orig = layer.params()[pi].value.data()[j];
            layer.params_mut()[pi].value.data_mut()[j] = orig + STEP;
            let fp = objective(&mut layer, &x, &g)?;
            layer.params_mut()[pi].value.data_mut()[j] = orig - STEP;
            let fm = objective(&mut layer, &x, &g)?;
            layer.params_mut()[pi].value.data_mut()[j] = orig;
            *slot = (fp - fm) / (2.0 * STEP);
        }
        worst = worst.max(rel_l2(a, &num));
    }
    Ok(worst)
}

/// Softmax cross-entropy gradient with respect to the logits.
pub fn check_softmax_ce(seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, c) = (4, 6);
    let logits: Vec<f64> = (0..n * c).map(|_| rng.random_range(-3.0..3.0)).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let t = Tensor::from_vec(&[n, c], logits.clone()).map_err(|e| e.to_string())?;
    let ce = softmax_cross_entropy(&t, &labels).map_err(|e| e.to_string())?;
    let loss_at = |v: Vec<f64>| -> Result<f64, String> {
        let t = Tensor::from_vec(&[n, c], v).map_err(|e| e.to_string())?;
        Ok(softmax_cross_entropy(&t, &labels).map_err(|e| e.to_string())?.loss)
    };
    let mut num = vec![0.0; n * c];
    for (i, slot) in num.iter_mut().enumerate() {
        let mut p = logits.clone();
        p[i] += STEP;
        let mut m = logits.clone();
        m[i] -= STEP;
        *slot = (loss_at(p)? - loss_at(m)?) / (2.0 * STEP);
    }
    Ok(rel_l2(ce.grad.data(), &num))
}

/// Small DeepResLFLB: every parameter gradient through residual blocks and head.
pub fn check_model(seed: u64) -> Result<f64, String> {
    let mut cfg = ModelConfig::for_input(1, 8, 12, 3);
    cfg.mfl = vec![LflbConfig::new(3)];
    let mut r = ResLflbConfig::new(4);
    r.bottleneck_channels = 2;
    r.n_mid_layers = 1;
    cfg.sfl = vec![r];
    cfg.erfd = ErfdConfig {
        dropout: 0.0,
        hidden: Some(5),
        n_classes: 3,
    };
    cfg.seed = seed;
    let mut model = build_model::<f64>(&cfg).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let shape = [3, 1, 8, 12];
    let x = Tensor::from_vec(&shape, (0..3 * 96).map(|_| rng.random_range(-1.0..1.0)).collect())
        .map_err(|e| e.to_string())?;
    let labels = [0usize, 2, 1];
    let loss = |m: &mut ser_core::Model<f64>, x: &Tensor<f64>| -> Result<f64, String> {
        let y = m.forward(x, Mode::Train).map_err(|e| e.to_string())?;
        m.clear_cache();
        Ok(softmax_cross_entropy(&y, &labels).map_err(|e| e.to_string())?.loss)
    };
    model.zero_grad();
    let y = model.forward(&x, Mode::Train).map_err(|e| e.to_string())?;
    let ce = softmax_cross_entropy(&y, &labels).map_err(|e| e.to_string())?;
    let dx = model.backward(&ce.grad).map_err(|e| e.to_string())?;

    let mut num_dx = vec![0.0; x.len()];
    for (i, slot) in num_dx.iter_mut().enumerate() {
        let mut xp = x.clone();
        xp.data_mut()[i] += STEP;
        let mut xm = x.clone();
        xm.data_mut()[i] -= STEP;
        *slot = (loss(&mut model, &xp)? - loss(&mut model, &xm)?) / (2.0 * STEP);
    }
    let mut worst = rel_l2(dx.data(), &num_dx);
    let analytic: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad.data().to_vec()).collect();
    for (pi, a) in analytic.iter().enumerate() {
        let mut num = vec![0.0; a.len()];
        for (j, slot) in num.iter_mut().enumerate() {
            let orig = model.params()[pi].value.data()[j];
            model.params_mut()[pi].value.data_mut()[j] = orig + STEP;
            let fp = loss(&mut model, &x)?;
            model.params_mut()[pi].value.data_mut()[j] = orig - STEP;
            let fm = loss(&mut model, &x)?;
            model.params_mut()[pi].value.data_mut()[j] = orig;
            *slot = (fp - fm) / (2.0 * STEP);
        }
        worst = worst.max(rel_l2(a, &num));
    }
    Ok(worst)
}

type Case = (&'static str, Vec<usize>, fn(&mut ChaCha8Rng) -> Layer<f64>);

pub fn layer_cases() -> Vec<Case> {
    vec![
        ("conv2d 3x3 same", vec![2, 2, 5, 6], |r| {
            Layer::Conv(Conv2d::new(2, 3, (3, 3), (1, 1), (1, 1), r))
        }),
        ("conv2d 2x3 stride 2", vec![2, 2, 6, 7], |r| {
            Layer::Conv(Conv2d::new(2, 2, (2, 3), (2, 2), (0, 1), r))
        }),
        ("conv2d 1x1", vec![2, 3, 4, 4], |r| {
            Layer::Conv(Conv2d::new(3, 2, (1, 1), (1, 1), (0, 0), r))
        }),
        ("batchnorm train", vec![3, 2, 3, 4], |r| {
            let mut bn = BatchNorm2d::new(2);
            for v in bn.gamma.value.data_mut() {
                *v = r.random_range(0.5..1.5);
            }
            for v in bn.beta.value.data_mut() {
                *v = r.random_range(-0.5..0.5);
            }
            Layer::BatchNorm(bn)
        }),
        ("relu", vec![2, 2, 3, 3], |_| Layer::Activation(Activation::new(ActivationKind::Relu))),
        ("elu", vec![2, 2, 3, 3], |_| {
            Layer::Activation(Activation::new(ActivationKind::Elu { alpha: 1.0 }))
        }),
        ("maxpool 2x2", vec![2, 2, 4, 6], |_| {
            Layer::Pool(Pool2d::new(PoolKind::Max, (2, 2), (2, 2)))
        }),
        ("avgpool 2x2", vec![2, 2, 4, 6], |_| {
            Layer::Pool(Pool2d::new(PoolKind::Avg, (2, 2), (2, 2)))
        }),
        ("maxpool 3x2 stride 1", vec![1, 2, 5, 4], |_| {
            Layer::Pool(Pool2d::new(PoolKind::Max, (3, 2), (1, 1)))
        }),
        ("dense", vec![3, 7], |r| Layer::Dense(Dense::new(7, 4, r))),
    ]
}

pub fn check() -> Result<Outcome, String> {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for seed in SEEDS {
        for (name, shape, make) in layer_cases() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = check_layer(make(&mut rng), &shape, seed)?;
            ensure!(e <= TOL, "{name} seed {seed}: relative error {e:e} > {TOL:e}");
            worst = worst.max(e);
            n += 1;
        }
        let e = check_softmax_ce(seed)?;
        ensure!(e <= TOL, "softmax-CE seed {seed}: relative error {e:e}");
        worst = worst.max(e);
        let e = check_model(seed)?;
        ensure!(e <= TOL, "whole model seed {seed}: relative error {e:e}");
        worst = worst.max(e);
        n += 2;
    }
    Ok(Outcome::Pass(format!("{n} checks over 3 seeds, worst relative error {worst:.1e}")))
}
