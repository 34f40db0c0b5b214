use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::audio_io::AudioClip;

/// Log-energy range below which all frames are judged against an absolute floor.
const DEGENERATE_RANGE: f64 = 1e-6;
/// Mean-square energy floor for the degenerate branch.
const ABSOLUTE_FLOOR: f64 = 1e-8;
const LOG_GUARD: f64 = 1e-30;

/// Per-frame voiced flags for a framing of a clip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameMask {
    pub frame_len: usize,
    pub hop: usize,
    pub voiced: Vec<bool>,
}

impl FrameMask {
    pub fn n_frames(&self) -> usize {
        self.voiced.len()
    }

    pub fn n_voiced(&self) -> usize {
        self.voiced.iter().filter(|&&v| v).count()
    }

    /// Sample range `[start, end)` of frame `t`.
    pub fn frame_span(&self, t: usize) -> (usize, usize) {
        (t * self.hop, t * self.hop + self.frame_len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VadConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub threshold_ratio: f64,
}

impl Default for VadConfig {
    /// 20 ms frames, 10 ms hop at 16 kHz.
    fn default() -> Self {
        Self {
            frame_len: 320,
            hop: 160,
            threshold_ratio: 0.25,
        }
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Energy-based voice activity detection.
///
/// A frame is voiced when its log mean-square energy exceeds
/// `p10 + threshold_ratio * (p90 - p10)` of the clip's frame energies. When
/// that range is degenerate, frames above an absolute energy floor are voiced.
pub fn detect_voice_frames(
    clip: &AudioClip,
    frame_len: usize,
    hop: usize,
    threshold_ratio: f64,
) -> Result<FrameMask, PreprocessError> {
    if frame_len == 0 || hop == 0 {
        return Err(PreprocessError::BadParameter(
            "frame_len and hop must be >= 1".into(),
        ));
    }
    let x = &clip.samples;
    if x.len() < frame_len {
        return Err(PreprocessError::ClipTooShort {
            len: x.len(),
            frame_len,
        });
    }
    let n_frames = 1 + (x.len() - frame_len) / hop;
    let energies: Vec<f64> = (0..n_frames)
        .map(|t| {
            let frame = &x[t * hop..t * hop + frame_len];
            frame.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>() / frame_len as f64
        })
        .collect();
    let log_e: Vec<f64> = energies.iter().map(|&e| (e + LOG_GUARD).ln()).collect();
    let mut sorted = log_e.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let floor = percentile(&sorted, 0.1);
    let range = percentile(&sorted, 0.9) - floor;
    let voiced = if range < DEGENERATE_RANGE {
        energies.iter().map(|&e| e > ABSOLUTE_FLOOR).collect()
    } else {
        let threshold = floor + threshold_ratio * range;
        log_e.iter().map(|&l| l > threshold).collect()
    };
    Ok(FrameMask {
        frame_len,
        hop,
        voiced,
    })
}

/// Drops samples before the first voiced frame and after the last one.
pub fn trim_to_voice(clip: &AudioClip, mask: &FrameMask) -> Result<AudioClip, PreprocessError> {
    let first = mask.voiced.iter().position(|&v| v);
    let last = mask.voiced.iter().rposition(|&v| v);
    let (Some(first), Some(last)) = (first, last) else {
        return Err(PreprocessError::NoVoicedFrames);
    };
    let start = mask.frame_span(first).0;
    let mut end = mask.frame_span(last).1.min(clip.len());
    if last + 1 == mask.n_frames() {
        // keep the tail that does not fill a whole frame
        end = clip.len();
    }
    if first == 0 && end == clip.len() {
        return Ok(clip.clone());
    }
    Ok(clip.map_samples(clip.samples[start..end].to_vec()))
}
