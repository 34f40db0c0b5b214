use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ser_core::dsp::{
    chromagram, delta, mfcc, stft, BinKind, FeatureMatrix, Matrix, StftConfig, WindowKind,
};
use ser_core::AudioClip;

use super::Outcome;
use crate::ensure;

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let s = (PI * i as f64 / n as f64).sin();
            s * s
        })
        .collect()
}

/// Direct O(N^2) DFT of one windowed frame, bins `0..=fft/2`.
fn dft_frame(x: &[f32], start: usize, window: &[f64], fft: usize) -> Vec<(f64, f64)> {
    (0..=fft / 2)
        .map(|k| {
            window.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, w)| {
                let v = x[start + i] as f64 * w;
                let ang = -2.0 * PI * (k * i) as f64 / fft as f64;
                (re + v * ang.cos(), im + v * ang.sin())
            })
        })
        .collect()
}

/// Worst relative L2 error of the library STFT against the direct DFT.
pub fn stft_vs_dft(n_signals: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_signals {
        let fft = [64usize, 128, 256][rng.random_range(0..3)];
        let window_len = rng.random_range(fft / 2..=fft);
        let hop = rng.random_range(1..=window_len / 2);
        let rect = rng.random_bool(0.3);
        let len = rng.random_range(window_len..window_len * 4);
        let x: Vec<f32> = (0..len).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let cfg = StftConfig {
            window_len,
            hop,
            fft_size: fft,
            window: if rect { WindowKind::Rectangular } else { WindowKind::Hann },
        };
        let spec = stft(&AudioClip::new(x.clone(), 16_000), &cfg).map_err(|e| e.to_string())?;
        let window = if rect { vec![1.0; window_len] } else { hann(window_len) };
        let frames = 1 + (len - window_len) / hop;
        ensure!(spec.n_frames == frames, "frame count {} != {frames}", spec.n_frames);
        let (mut num, mut den) = (0.0, 0.0);
        for t in 0..frames {
            for (k, (re, im)) in dft_frame(&x, t * hop, &window, fft).into_iter().enumerate() {
                let c = spec.get(k, t);
                num += (c.re - re).powi(2) + (c.im - im).powi(2);
                den += re * re + im * im;
            }
        }
        worst = worst.max((num / den).sqrt());
    }
    Ok(worst)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, kind: BinKind) -> FeatureMatrix {
    FeatureMatrix {
        values: Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-10.0..2.0)).collect()),
        kind,
        frame_hop_seconds: 0.01,
    }
}

/// Worst absolute MFCC error against the DCT-II sum written out per coefficient.
pub fn mfcc_vs_dct(seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n_mels = rng.random_range(13..64);
        let frames = rng.random_range(1..40);
        let n_mfcc = rng.random_range(1..=13);
        let lms = random_matrix(&mut rng, n_mels, frames, BinKind::MelLog);
        let out = mfcc(&lms, n_mfcc).map_err(|e| e.to_string())?;
        let m = n_mels as f64;
        for k in 0..n_mfcc {
            let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            for t in 0..frames {
                let direct: f64 = (0..n_mels)
                    .map(|i| lms.values.get(i, t) * (PI * k as f64 * (i as f64 + 0.5) / m).cos())
                    .sum::<f64>()
                    * scale;
                worst = worst.max((direct - out.values.get(k, t)).abs());
            }
        }
    }
    Ok(worst)
}

/// Worst absolute delta error against the regression formula with clamped edges.
pub fn delta_vs_regression(seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let rows = rng.random_range(1..14);
        let frames = rng.random_range(1..60);
        let width = [3usize, 5, 7, 9][rng.random_range(0..4)];
        let c = random_matrix(&mut rng, rows, frames, BinKind::Mfcc);
        let d = delta(&c, width).map_err(|e| e.to_string())?;
        let big_n = (width - 1) / 2;
        let denom = 2.0 * (1..=big_n).map(|n| (n * n) as f64).sum::<f64>();
        let at = |r: usize, t: i64| c.values.get(r, t.clamp(0, frames as i64 - 1) as usize);
        for r in 0..rows {
            for t in 0..frames as i64 {
                let direct = (1..=big_n as i64)
                    .map(|n| n as f64 * (at(r, t + n) - at(r, t - n)))
                    .sum::<f64>()
                    / denom;
                worst = worst.max((direct - d.values.get(r, t as usize)).abs());
            }
        }
    }
    Ok(worst)
}

/// Tones one and two octaves apart must land on the same, expected pitch class.
pub fn chroma_octaves() -> Result<usize, String> {
    let cfg = StftConfig {
        window_len: 4096,
        hop: 2048,
        fft_size: 4096,
        window: WindowKind::Hann,
    };
    // (base frequency, expected class with C = 0)
    let notes = [(220.0, 9), (261.625_565, 0), (293.664_768, 2), (329.627_557, 4), (392.0, 7)];
    let mut checked = 0;
    for (f0, class) in notes {
        for octave in 0..3 {
            let f = f0 * 2f64.powi(octave);
            let x: Vec<f32> = (0..16_000)
                .map(|i| (0.5 * (2.0 * PI * f * i as f64 / 16_000.0).sin()) as f32)
                .collect();
            let ch = chromagram(&AudioClip::new(x, 16_000), &cfg).map_err(|e| e.to_string())?;
            for t in 0..ch.n_frames() {
                let col = ch.values.column(t);
                let argmax = (0..12).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
                ensure!(argmax == class, "{f:.1} Hz frame {t}: class {argmax}, expected {class}");
                checked += 1;
            }
        }
    }
    Ok(checked)
}

pub fn check() -> Result<Outcome, String> {
    let s = stft_vs_dft(50, 1)?;
    ensure!(s <= 1e-6, "STFT relative L2 error {s:e} > 1e-6");
    let m = mfcc_vs_dct(2)?;
    ensure!(m <= 1e-10, "MFCC error {m:e} > 1e-10");
    let d = delta_vs_regression(3)?;
    ensure!(d <= 1e-12, "delta error {d:e} > 1e-12");
    let frames = chroma_octaves()?;
    Ok(Outcome::Pass(format!(
        "stft rel {s:.1e}, mfcc {m:.1e}, delta {d:.1e}, chroma {frames} frames octave-invariant"
    )))
}
