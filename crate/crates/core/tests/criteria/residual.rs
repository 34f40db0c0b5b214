use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ser_core::model::{build_reslflb, Block, ResLflbConfig};
use ser_core::nn::{ActivationKind, Mode, Tensor};

use super::Outcome;
use crate::ensure;

fn block(seed: u64) -> Result<Block<f64>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build_reslflb::<f64>(3, &ResLflbConfig::new(8), ActivationKind::Elu { alpha: 1.0 }, &mut rng)
        .map_err(|e| e.to_string())
}

fn input(seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = [4, 3, 10, 14];
    let n = shape.iter().product();
    Tensor::from_vec(&shape, (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
}

/// With every branch parameter zeroed the block output is its skip input,
/// bit for bit; with a live branch it is exactly `s + F(s)`.
pub fn check() -> Result<Outcome, String> {
    let mut checked = 0;
    for seed in [1u64, 2, 3] {
        let x = input(seed);
        let mut b = block(seed)?;
        let Block::Residual { pre, branch } = &mut b else {
            return Err("ResLFLB did not build a residual block".into());
        };
        for p in branch.params_mut() {
            p.value.fill(0.0);
        }
        let s = pre.forward(&x, Mode::Infer).map_err(|e| e.to_string())?;
        let y = b.forward(&x, Mode::Infer).map_err(|e| e.to_string())?;
        ensure!(y.shape() == s.shape(), "shape {:?} vs {:?}", y.shape(), s.shape());
        let same = y.data().iter().zip(s.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure!(same, "seed {seed}: zeroed branch output differs from skip input");

        let mut live = block(seed)?;
        let Block::Residual { pre, branch } = &mut live else { unreachable!() };
        let s = pre.forward(&x, Mode::Infer).map_err(|e| e.to_string())?;
        let f = branch.forward(&s, Mode::Infer).map_err(|e| e.to_string())?;
        ensure!(f.data().iter().any(|v| *v != 0.0), "live branch is identically zero");
        let want: Vec<f64> = s.data().iter().zip(f.data()).map(|(a, b)| a + b).collect();
        let y = live.forward(&x, Mode::Infer).map_err(|e| e.to_string())?;
        let same = y.data().iter().zip(&want).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure!(same, "seed {seed}: output is not s + F(s)");
        checked += y.len();
    }
    Ok(Outcome::Pass(format!("zeroed branch is the identity on the skip path; {checked} live outputs equal s + F(s)")))
}
