//! Trainable parameters counted by hand from the layer shapes.

use ser_core::model::{
    build_2dlflb_baseline, build_model, count_parameters, BaselineConfig, ModelConfig,
};

use super::Outcome;
use crate::ensure;

fn conv(cin: usize, cout: usize, k: usize) -> usize {
    cin * cout * k * k + cout
}

fn bn(c: usize) -> usize {
    2 * c
}

fn lflb(cin: usize, cout: usize) -> usize {
    conv(cin, cout, 3) + bn(cout)
}

/// NAC layer: batchnorm over the input channels, then conv.
fn nac(cin: usize, cout: usize, k: usize) -> usize {
    bn(cin) + conv(cin, cout, k)
}

fn reslflb(cin: usize, cout: usize, bottleneck: usize, n_mid: usize) -> usize {
    let mut n = lflb(cin, cout) + nac(cout, bottleneck, 1);
    for _ in 0..n_mid {
        n += nac(bottleneck, bottleneck, 3);
    }
    n + nac(bottleneck, cout, 1)
}

/// Default DeepResLFLB for an input of height `h` and `classes` outputs.
/// Height halves at each of the four 2x2 pools; the head sees `channels x height`.
pub fn deepreslflb_ledger(h: usize, classes: usize) -> usize {
    let h_out = h / 2 / 2 / 2 / 2;
    lflb(1, 32) + lflb(32, 64) + reslflb(64, 64, 16, 2) + reslflb(64, 128, 32, 2) + (128 * h_out + 1) * classes
}

/// Plain LFLB stack with widths 32, 64, 128, 128.
pub fn baseline_ledger(h: usize, classes: usize) -> usize {
    let h_out = h / 2 / 2 / 2 / 2;
    lflb(1, 32) + lflb(32, 64) + lflb(64, 128) + lflb(128, 128) + (128 * h_out + 1) * classes
}

pub fn check() -> Result<Outcome, String> {
    let mut lines = Vec::new();
    for (name, h) in [("LMS", 40usize), ("LMSDDC", 78)] {
        let cfg = ModelConfig::for_input(1, h, 300, 7);
        let m = count_parameters(&build_model::<f32>(&cfg).map_err(|e| e.to_string())?);
        let b = count_parameters(
            &build_2dlflb_baseline::<f32>(&BaselineConfig::matched(&cfg)).map_err(|e| e.to_string())?,
        );
        let (lm, lb) = (deepreslflb_ledger(h, 7), baseline_ledger(h, 7));
        ensure!(m == lm, "{name}: model has {m} parameters, ledger {lm}");
        ensure!(b == lb, "{name}: baseline has {b} parameters, ledger {lb}");
        let reduction = 1.0 - m as f64 / b as f64;
        ensure!(reduction >= 0.30, "{name}: reduction {:.2}% < 30%", reduction * 100.0);
        lines.push(format!("{name} {m} vs {b} (-{:.2}%)", reduction * 100.0));
    }
    Ok(Outcome::Pass(lines.join(", ")))
}
