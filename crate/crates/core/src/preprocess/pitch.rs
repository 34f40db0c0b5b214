use std::f64::consts::PI;

use super::PreprocessError;
use crate::audio_io::{rational_approx, resample_rational, AudioClip};

const OLA_FRAME: usize = 512;
const MAX_DENOMINATOR: usize = 1000;

/// Shifts pitch by `semitones` while keeping the duration.
///
/// The clip is resampled by `2^(-semitones/12)` (raising or lowering every
/// frequency when played at the original rate) and then time-stretched back
/// to its original length with waveform-similarity overlap-add.
pub fn pitch_shift(clip: &AudioClip, semitones: f64) -> Result<AudioClip, PreprocessError> {
    if !semitones.is_finite() || semitones.abs() > 12.0 {
        return Err(PreprocessError::BadParameter(format!(
            "|semitones| must be <= 12, got {semitones}"
        )));
    }
    if semitones == 0.0 || clip.is_empty() {
        return Ok(clip.clone());
    }
    let ratio = 2f64.powf(semitones / 12.0);
    let (up, down) = rational_approx(1.0 / ratio, MAX_DENOMINATOR);
    let squeezed = resample_rational(&clip.samples, up, down);
    let stretched = time_stretch_to(&squeezed, clip.len());
    Ok(clip.map_samples(
        stretched.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect(),
    ))
}

/// WSOLA time stretch of `x` to exactly `out_len` samples.
pub fn time_stretch_to(x: &[f32], out_len: usize) -> Vec<f32> {
    if out_len == 0 || x.is_empty() {
        return vec![0.0; out_len];
    }
    let n = OLA_FRAME.min(x.len().next_power_of_two()).max(4);
    let syn_hop = n / 2;
    let tolerance = syn_hop / 2;
    let ana_hop = syn_hop as f64 * x.len() as f64 / out_len as f64;
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect();

    let get = |i: isize| -> f64 {
        if i >= 0 && (i as usize) < x.len() {
            x[i as usize] as f64
        } else {
            0.0
        }
    };

    let n_frames = out_len / syn_hop + 2;
    let mut out = vec![0.0f64; n_frames * syn_hop + n];
    let mut norm = vec![0.0f64; out.len()];
    let mut prev: Option<isize> = None;
    for m in 0..n_frames {
        let nominal = (m as f64 * ana_hop).round() as isize;
        let pos = match prev {
            None => nominal,
            Some(p) => {
                // continue the previous segment as naturally as possible
                let target = p + syn_hop as isize;
                let mut best = (nominal, f64::MIN);
                for d in -(tolerance as isize)..=(tolerance as isize) {
                    let cand = nominal + d;
                    let score: f64 = (0..syn_hop)
                        .step_by(2)
                        .map(|i| get(cand + i as isize) * get(target + i as isize))
                        .sum();
                    if score > best.1 {
                        best = (cand, score);
                    }
                }
                best.0
            }
        };
        prev = Some(pos);
        let base = m * syn_hop;
        for i in 0..n {
            out[base + i] += window[i] * get(pos + i as isize);
            norm[base + i] += window[i];
        }
    }
    // frame 0 starts at output 0 but only its centre is fully overlapped;
    // normalize by the window sum everywhere
    out.iter()
        .zip(&norm)
        .take(out_len)
        .map(|(&v, &w)| if w > 1e-6 { (v / w) as f32 } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::num_complex::Complex64;
    use rustfft::FftPlanner;

    fn tone(freq: f64, secs: f64) -> AudioClip {
        AudioClip::new(
            (0..(16000.0 * secs) as usize)
                .map(|i| (0.5 * (2.0 * PI * freq * i as f64 / 16000.0).sin()) as f32)
                .collect(),
            16000,
        )
    }

    /// Peak frequency of the middle second, 1 Hz resolution.
    fn peak_hz(clip: &AudioClip) -> f64 {
        let mid = clip.len() / 2;
        let seg = &clip.samples[mid - 8000..mid + 8000];
        let mut buf: Vec<Complex64> = seg.iter().map(|&s| Complex64::new(s as f64, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        let k = (1..buf.len() / 2)
            .max_by(|&a, &b| buf[a].norm().partial_cmp(&buf[b].norm()).unwrap())
            .unwrap();
        k as f64 * 16000.0 / buf.len() as f64
    }

    #[test]
    fn zero_shift_keeps_pitch() {
        let c = tone(440.0, 2.0);
        let s = pitch_shift(&c, 0.0).unwrap();
        assert!((peak_hz(&s) - 440.0).abs() / 440.0 <= 0.005);
    }

    #[test]
    fn octave_up_and_down() {
        let up = pitch_shift(&tone(440.0, 2.0), 12.0).unwrap();
        assert_eq!(up.len(), 32000);
        let f = peak_hz(&up);
        assert!((f - 880.0).abs() / 880.0 <= 0.03, "got {f}");

        let down = pitch_shift(&tone(880.0, 2.0), -12.0).unwrap();
        assert_eq!(down.len(), 32000);
        let f = peak_hz(&down);
        assert!((f - 440.0).abs() / 440.0 <= 0.03, "got {f}");
    }

    #[test]
    fn two_semitones() {
        let s = pitch_shift(&tone(440.0, 2.0), 2.0).unwrap();
        let want = 440.0 * 2f64.powf(2.0 / 12.0);
        assert!((peak_hz(&s) - want).abs() / want <= 0.03);
        assert_eq!(s.sample_rate, 16000);
    }

    #[test]
    fn out_of_range() {
        assert!(pitch_shift(&tone(440.0, 0.1), 13.0).is_err());
    }

    #[test]
    fn stretch_length_exact() {
        let x: Vec<f32> = (0..1000).map(|i| (i as f32 * 0.1).sin()).collect();
        assert_eq!(time_stretch_to(&x, 1234).len(), 1234);
        assert_eq!(time_stretch_to(&x, 10).len(), 10);
    }
}
