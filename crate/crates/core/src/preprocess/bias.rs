use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::FrameMask;
use crate::audio_io::AudioClip;

/// Largest DFT magnitude below which a frame carries no information.
pub const BIAS_THRESHOLD: f64 = 1e-8;

/// Flips voiced frames whose DFT magnitude spectrum has L-infinity norm below
/// [`BIAS_THRESHOLD`] to unvoiced. Unvoiced frames are never touched.
pub fn clean_bias_frames(clip: &AudioClip, mask: &FrameMask) -> FrameMask {
    let fft = FftPlanner::<f64>::new().plan_fft_forward(mask.frame_len);
    let mut buf = vec![Complex64::new(0.0, 0.0); mask.frame_len];
    let mut voiced = mask.voiced.clone();
    for (t, flag) in voiced.iter_mut().enumerate() {
        if !*flag {
            continue;
        }
        let (start, end) = mask.frame_span(t);
        if end > clip.len() {
            continue;
        }
        for (b, &s) in buf.iter_mut().zip(&clip.samples[start..end]) {
            *b = Complex64::new(s as f64, 0.0);
        }
        fft.process(&mut buf);
        let peak = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if peak < BIAS_THRESHOLD {
            *flag = false;
        }
    }
    FrameMask {
        voiced,
        ..mask.clone()
    }
}

/// Removes the hop-sized chunk of every frame that `cleaned` rejected relative
/// to `original`.
pub fn excise_frames(clip: &AudioClip, original: &FrameMask, cleaned: &FrameMask) -> AudioClip {
    let mut keep = vec![true; clip.len()];
    let mut any = false;
    for (t, (&before, &after)) in original.voiced.iter().zip(&cleaned.voiced).enumerate() {
        if before && !after {
            let start = t * original.hop;
            let end = (start + original.hop).min(clip.len());
            keep[start..end].iter_mut().for_each(|k| *k = false);
            any = true;
        }
    }
    if !any {
        return clip.clone();
    }
    let samples = clip
        .samples
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(&s, _)| s)
        .collect();
    clip.map_samples(samples)
}
