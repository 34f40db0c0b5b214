use super::{stft, BinKind, DspError, FeatureMatrix, Matrix, StftConfig};
use crate::audio_io::AudioClip;

/// Lowest frequency (A0) mapped to a pitch class.
const MIN_PITCH_HZ: f64 = 27.5;

/// Pitch class of a frequency with C = 0, ..., A = 9, ..., B = 11.
pub fn pitch_class(freq_hz: f64) -> Option<usize> {
    if freq_hz < MIN_PITCH_HZ {
        return None;
    }
    let semis = (12.0 * (freq_hz / 440.0).log2()).round() as i64;
    Some((semis + 9).rem_euclid(12) as usize)
}

/// 12-bin chromagram: STFT power folded onto pitch classes, each frame scaled
/// so its largest class is 1 (silent frames stay zero).
pub fn chromagram(clip: &AudioClip, stft_cfg: &StftConfig) -> Result<FeatureMatrix, DspError> {
    let spec = stft(clip, stft_cfg)?;
    let classes: Vec<Option<usize>> = (0..spec.n_bins)
        .map(|k| pitch_class(k as f64 * clip.sample_rate as f64 / stft_cfg.fft_size as f64))
        .collect();
    let frames = spec.n_frames;
    let mut out = Matrix::zeros(12, frames);
    for (k, class) in classes.iter().enumerate() {
        let Some(p) = class else { continue };
        for t in 0..frames {
            let e = spec.get(k, t).norm_sqr();
            out.data[p * frames + t] += e;
        }
    }
    for t in 0..frames {
        let max = (0..12).map(|p| out.get(p, t)).fold(0.0, f64::max);
        if max > 0.0 {
            for p in 0..12 {
                out.set(p, t, out.get(p, t) / max);
            }
        }
    }
    Ok(FeatureMatrix {
        values: out,
        kind: BinKind::Chroma,
        frame_hop_seconds: spec.frame_hop_seconds,
    })
}
