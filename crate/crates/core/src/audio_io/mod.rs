//! Audio loading, resampling, dataset catalogs and deterministic splits.

mod dataset;
mod resample;
mod split;
mod wav;

use thiserror::Error;

pub use dataset::{
    read_manifest, EMODB_EMOTION_CODES, EMODB_SPEAKERS, scan_dataset, write_manifest, write_rejects, ClassScheme, Dataset, Emotion,
    Gender, Reject, ScanResult, UtteranceRecord,
};
pub use resample::{resample, resample_rational, rational_approx};
pub use split::{kfold_partitions, split_dataset, SplitPlan, SplitRatios};
pub use wav::{load_wav, write_wav};

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("unsupported WAV encoding in {path}: {detail}")]
    UnsupportedEncoding { path: String, detail: String },
    #[error("corrupt WAV header in {path}: {detail}")]
    CorruptHeader { path: String, detail: String },
    #[error("invalid sample rate {0}")]
    BadSampleRate(u32),
    #[error("no audio files found under {0}")]
    EmptyDataset(String),
    #[error("unknown emotion code in {0}")]
    UnknownEmotionCode(String),
    #[error("invalid split: {0}")]
    BadSplit(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Mono waveform with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub source_path: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
            source_path: String::new(),
        }
    }

    pub fn with_source(mut self, path: impl Into<String>) -> Self {
        self.source_path = path.into();
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Mean-square amplitude.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>()
            / self.samples.len() as f64
    }

    /// Same clip with new samples, keeping rate and source.
    pub fn map_samples(&self, samples: Vec<f32>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
            source_path: self.source_path.clone(),
        }
    }
}
