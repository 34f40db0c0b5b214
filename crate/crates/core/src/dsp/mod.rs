//! Time–frequency features: STFT, log-mel spectrogram, MFCC deltas,
//! chromagram and the stacked LMSDDC representation.

mod cache;
mod cepstral;
mod chroma;
mod mel;
mod stack;
mod stft;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioClip;

pub use cache::{read_serf, read_serf_file, write_serf, write_serf_file, SERF_MAGIC, SERF_VERSION};
pub use cepstral::{dct_matrix, delta, mfcc};
pub use chroma::{chromagram, pitch_class};
pub use mel::{hz_to_mel, log_mel_spectrogram, mel_center_frequencies, mel_filterbank, mel_to_hz, MelConfig, LOG_FLOOR};
pub use stack::{fix_length, stack_lmsddc, standardize};
pub use stft::{power_spectrogram, stft, Stft, StftConfig, WindowKind};

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("clip has {len} samples, fewer than the window length {window_len}")]
    ClipTooShort { len: usize, window_len: usize },
    #[error("invalid STFT config: {0}")]
    BadStftConfig(String),
    #[error("invalid mel range: {0}")]
    BadRange(String),
    #[error("n_mfcc {n_mfcc} exceeds n_mels {n_mels}")]
    BadCoefficientCount { n_mfcc: usize, n_mels: usize },
    #[error("delta width must be odd and >= 3, got {0}")]
    BadWidth(usize),
    #[error("frame counts differ: {0:?}")]
    FrameCountMismatch(Vec<usize>),
    #[error("feature cache: {0}")]
    Cache(String),
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinKind {
    MelLog,
    Mfcc,
    MfccDelta,
    MfccDelta2,
    Chroma,
}

/// A `[bins x frames]` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub kind: BinKind,
    pub frame_hop_seconds: f64,
}

impl FeatureMatrix {
    pub fn n_bins(&self) -> usize {
        self.values.rows
    }

    pub fn n_frames(&self) -> usize {
        self.values.cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Lms,
    Lmsddc,
}

impl FeatureKind {
    pub fn code(self) -> u8 {
        match self {
            FeatureKind::Lms => 0,
            FeatureKind::Lmsddc => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FeatureKind::Lms),
            1 => Some(FeatureKind::Lmsddc),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Lms => "lms",
            FeatureKind::Lmsddc => "lmsddc",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lms" => Ok(FeatureKind::Lms),
            "lmsddc" => Ok(FeatureKind::Lmsddc),
            other => Err(format!("unknown feature kind '{other}' (expected lms or lmsddc)")),
        }
    }
}

/// Single-channel `[channels x height x frames]` network input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub channels: usize,
    pub height: usize,
    pub frames: usize,
    pub layout: FeatureKind,
    pub values: Vec<f32>,
}

impl FeatureTensor {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.frames)
    }

    #[inline]
    pub fn get(&self, c: usize, h: usize, t: usize) -> f32 {
        self.values[(c * self.height + h) * self.frames + t]
    }

    pub fn mean(&self) -> f32 {
        if self.values.is_empty() {
            return 0.0;
        }
        (self.values.iter().map(|&v| v as f64).sum::<f64>() / self.values.len() as f64) as f32
    }
}

/// Every knob of the feature pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub stft: StftConfig,
    pub mel: MelConfig,
    pub n_mfcc: usize,
    pub delta_width: usize,
    pub delta2_width: usize,
    pub target_frames: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: crate::CANONICAL_SAMPLE_RATE,
            stft: StftConfig::default(),
            mel: MelConfig::default(),
            n_mfcc: 13,
            delta_width: 9,
            delta2_width: 9,
            target_frames: 300,
        }
    }
}

impl FeatureConfig {
    /// Height of the network input for a feature kind.
    pub fn height(&self, kind: FeatureKind) -> usize {
        match kind {
            FeatureKind::Lms => self.mel.n_mels,
            FeatureKind::Lmsddc => self.mel.n_mels + 2 * self.n_mfcc + 12,
        }
    }
}

/// Computes the feature tensor for `kind`, standardized and fixed to
/// `cfg.target_frames` frames.
pub fn extract_features(
    clip: &AudioClip,
    kind: FeatureKind,
    cfg: &FeatureConfig,
) -> Result<FeatureTensor, DspError> {
    let lms = log_mel_spectrogram(clip, &cfg.stft, &cfg.mel)?;
    let tensor = match kind {
        FeatureKind::Lms => {
            let values = standardize(&lms.values.data);
            FeatureTensor {
                channels: 1,
                height: lms.n_bins(),
                frames: lms.n_frames(),
                layout: FeatureKind::Lms,
                values,
            }
        }
        FeatureKind::Lmsddc => {
            let c = mfcc(&lms, cfg.n_mfcc)?;
            let d1 = delta(&c, cfg.delta_width)?;
            let d2 = delta(&d1, cfg.delta2_width)?;
            let chroma = chromagram(clip, &cfg.stft)?;
            stack_lmsddc(&lms, &d1, &d2, &chroma)?
        }
    };
    Ok(fix_length(&tensor, cfg.target_frames))
}
