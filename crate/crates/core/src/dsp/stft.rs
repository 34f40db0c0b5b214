use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{DspError, Matrix};
use crate::audio_io::AudioClip;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 512,
            hop: 256,
            fft_size: 512,
            window: WindowKind::Hann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        if self.window_len == 0 || self.hop == 0 {
            return Err(DspError::BadStftConfig("window and hop must be positive".into()));
        }
        if self.hop > self.window_len {
            return Err(DspError::BadStftConfig(format!(
                "hop {} exceeds window {}",
                self.hop, self.window_len
            )));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < self.window_len {
            return Err(DspError::BadStftConfig(format!(
                "fft_size {} must be a power of two >= window {}",
                self.fft_size, self.window_len
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            1 + (len - self.window_len) / self.hop
        }
    }

    pub fn window_coeffs(&self) -> Vec<f64> {
        let n = self.window_len;
        match self.window {
            // periodic Hann
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
            WindowKind::Rectangular => vec![1.0; n],
        }
    }
}

/// One-sided complex spectrogram, `[n_bins x n_frames]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Stft {
    pub n_bins: usize,
    pub n_frames: usize,
    pub data: Vec<Complex64>,
    pub frame_hop_seconds: f64,
}

impl Stft {
    #[inline]
    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[bin * self.n_frames + frame]
    }
}

/// Short-time Fourier transform; frame `t` covers samples `[t*hop, t*hop + window_len)`.
pub fn stft(clip: &AudioClip, cfg: &StftConfig) -> Result<Stft, DspError> {
    cfg.validate()?;
    let x = &clip.samples;
    if x.len() < cfg.window_len {
        return Err(DspError::ClipTooShort {
            len: x.len(),
            window_len: cfg.window_len,
        });
    }
    let n_frames = cfg.n_frames(x.len());
    let n_bins = cfg.n_bins();
    let window = cfg.window_coeffs();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut data = vec![Complex64::new(0.0, 0.0); n_bins * n_frames];
    for t in 0..n_frames {
        let start = t * cfg.hop;
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (i, w) in window.iter().enumerate() {
            buf[i].re = x[start + i] as f64 * w;
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..n_bins {
            data[k * n_frames + t] = buf[k];
        }
    }
    Ok(Stft {
        n_bins,
        n_frames,
        data,
        frame_hop_seconds: cfg.hop as f64 / clip.sample_rate as f64,
    })
}

/// Elementwise `|X|^2`.
pub fn power_spectrogram(spec: &Stft) -> Matrix {
    Matrix::from_vec(
        spec.n_bins,
        spec.n_frames,
        spec.data.iter().map(|c| c.norm_sqr()).collect(),
    )
}
