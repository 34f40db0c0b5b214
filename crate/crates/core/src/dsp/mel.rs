use serde::{Deserialize, Serialize};

use super::{power_spectrogram, stft, BinKind, DspError, FeatureMatrix, Matrix, StftConfig};
use crate::audio_io::AudioClip;

/// Added to mel energies before the log so silent bins stay finite.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_mels: 40,
            fmin: 20.0,
            fmax: 8000.0,
        }
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// The `n_mels + 2` band edges, equally spaced in mel between `fmin` and `fmax`.
fn band_edges(n_mels: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect()
}

/// Center frequency in Hz of each triangular filter.
pub fn mel_center_frequencies(n_mels: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    band_edges(n_mels, fmin, fmax)[1..=n_mels].to_vec()
}

/// Triangular mel filterbank, `[n_mels x fft_size/2+1]`, peak height 1.
pub fn mel_filterbank(
    n_mels: usize,
    sample_rate: u32,
    fft_size: usize,
    fmin: f64,
    fmax: f64,
) -> Result<Matrix, DspError> {
    let nyquist = sample_rate as f64 / 2.0;
    if n_mels == 0 {
        return Err(DspError::BadRange("n_mels must be >= 1".into()));
    }
    if !(0.0 <= fmin && fmin < fmax && fmax <= nyquist) {
        return Err(DspError::BadRange(format!(
            "need 0 <= fmin ({fmin}) < fmax ({fmax}) <= {nyquist}"
        )));
    }
    let n_bins = fft_size / 2 + 1;
    let edges = band_edges(n_mels, fmin, fmax);
    let mut fb = Matrix::zeros(n_mels, n_bins);
    for m in 0..n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * sample_rate as f64 / fft_size as f64;
            let w = if f > left && f <= center {
                (f - left) / (center - left)
            } else if f > center && f < right {
                (right - f) / (right - center)
            } else {
                0.0
            };
            fb.set(m, k, w);
        }
    }
    Ok(fb)
}

/// `ln(mel_fb . |STFT|^2 + 1e-10)`.
pub fn log_mel_spectrogram(
    clip: &AudioClip,
    stft_cfg: &StftConfig,
    mel_cfg: &MelConfig,
) -> Result<FeatureMatrix, DspError> {
    let spec = stft(clip, stft_cfg)?;
    let power = power_spectrogram(&spec);
    let fb = mel_filterbank(
        mel_cfg.n_mels,
        clip.sample_rate,
        stft_cfg.fft_size,
        mel_cfg.fmin,
        mel_cfg.fmax,
    )?;
    let frames = power.cols;
    let mut out = Matrix::zeros(mel_cfg.n_mels, frames);
    for m in 0..mel_cfg.n_mels {
        let weights = fb.row(m);
        let row = &mut out.data[m * frames..(m + 1) * frames];
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (acc, &p) in row.iter_mut().zip(power.row(k)) {
                *acc += w * p;
            }
        }
        row.iter_mut().for_each(|v| *v = (*v + LOG_FLOOR).ln());
    }
    Ok(FeatureMatrix {
        values: out,
        kind: BinKind::MelLog,
        frame_hop_seconds: spec.frame_hop_seconds,
    })
}
