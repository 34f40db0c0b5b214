use std::f64::consts::PI;

use super::{AudioClip, AudioError};

/// Zero crossings of the sinc kernel on each side, at the lower of the two Nyquist rates.
const ZERO_CROSSINGS: usize = 16;
/// Passband edge as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.95;

/// Resamples a clip to `target_rate` with a polyphase windowed-sinc filter.
///
/// Output length is `round(len * target / source)`.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::BadSampleRate(target_rate));
    }
    if clip.sample_rate == 0 {
        return Err(AudioError::BadSampleRate(clip.sample_rate));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let g = gcd(target_rate as u64, clip.sample_rate as u64);
    let up = (target_rate as u64 / g) as usize;
    let down = (clip.sample_rate as u64 / g) as usize;
    Ok(AudioClip {
        samples: resample_rational(&clip.samples, up, down),
        sample_rate: target_rate,
        source_path: clip.source_path.clone(),
    })
}

/// Resamples by the rational factor `up / down`.
pub fn resample_rational(samples: &[f32], up: usize, down: usize) -> Vec<f32> {
    assert!(up > 0 && down > 0, "resampling factors must be positive");
    if up == down {
        return samples.to_vec();
    }
    let out_len = (samples.len() as f64 * up as f64 / down as f64).round() as usize;
    if samples.is_empty() || out_len == 0 {
        return Vec::new();
    }
    let bank = PolyphaseBank::new(up, down);
    let half = bank.half as isize;
    let n_in = samples.len() as isize;
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let pos = n * down;
        let base = (pos / up) as isize;
        let taps = bank.phase(pos % up);
        // tap j corresponds to input index base + j - half + 1
        let start = base - half + 1;
        let mut acc = 0.0f64;
        for (j, &h) in taps.iter().enumerate() {
            let idx = start + j as isize;
            if idx >= 0 && idx < n_in {
                acc += h * samples[idx as usize] as f64;
            }
        }
        out.push(acc as f32);
    }
    out
}

/// Best rational approximation `p / q` of `ratio` with `q <= max_den`.
pub fn rational_approx(ratio: f64, max_den: usize) -> (usize, usize) {
    assert!(ratio > 0.0 && ratio.is_finite());
    let mut best = (ratio.round().max(1.0) as usize, 1usize);
    let mut best_err = (best.0 as f64 - ratio).abs();
    for q in 2..=max_den.max(1) {
        let p = (ratio * q as f64).round().max(1.0);
        let err = (p / q as f64 - ratio).abs();
        if err < best_err - 1e-15 {
            best = (p as usize, q);
            best_err = err;
        }
    }
    let g = gcd(best.0 as u64, best.1 as u64) as usize;
    (best.0 / g, best.1 / g)
}

struct PolyphaseBank {
    half: usize,
    taps: Vec<f64>,
    width: usize,
}

impl PolyphaseBank {
    fn new(up: usize, down: usize) -> Self {
        // cutoff relative to the input Nyquist
        let cutoff = ROLLOFF * (up as f64 / down as f64).min(1.0);
        let half = (ZERO_CROSSINGS as f64 / cutoff).ceil() as usize;
        let width = 2 * half;
        let mut taps = vec![0.0; up * width];
        for p in 0..up {
            let frac = p as f64 / up as f64;
            let row = &mut taps[p * width..(p + 1) * width];
            for (j, h) in row.iter_mut().enumerate() {
                // distance from output instant to input sample base + j - half + 1
                let t = frac - (j as f64 - half as f64 + 1.0);
                *h = cutoff * sinc(cutoff * t) * blackman(t, half as f64);
            }
            let sum: f64 = row.iter().sum();
            if sum.abs() > 1e-12 {
                row.iter_mut().for_each(|h| *h /= sum);
            }
        }
        Self { half, taps, width }
    }

    fn phase(&self, p: usize) -> &[f64] {
        &self.taps[p * self.width..(p + 1) * self.width]
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn blackman(t: f64, half: f64) -> f64 {
    if t.abs() >= half {
        return 0.0;
    }
    let x = (t + half) / (2.0 * half);
    0.42 - 0.5 * (2.0 * PI * x).cos() + 0.08 * (4.0 * PI * x).cos()
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
