//! Speech emotion recognition from raw audio.
//!
//! The crate covers the whole batch pipeline:
//!
//! ```text
//! WAV -> resample -> voice activity trim -> bias-frame cleaning
//!     -> LMS / LMSDDC features -> DeepResLFLB CNN -> metrics
//! ```
//!
//! - [`audio_io`]: WAV loading, resampling, EMODB/RAVDESS catalogs and splits.
//! - [`dsp`]: STFT, log-mel spectrogram, MFCC deltas, chromagram, feature stacking.
//! - [`preprocess`]: VAD, bias-frame rejection and augmentation.
//! - [`nn`]: a small CPU tensor engine with exact reverse-mode gradients.
//! - [`model`]: LFLB / ResLFLB blocks, the DeepResLFLB network and a plain-LFLB baseline.
//! - [`train`]: Adam, plateau LR reduction, early stopping and k-fold orchestration.
//! - [`eval`]: confusion matrices and macro-averaged metrics.
//! - [`cli`]: the `ser` command-line front end.

pub mod audio_io;
pub mod cli;
pub mod config_file;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod preprocess;
pub mod synth;
pub mod train;

pub use audio_io::{AudioClip, Dataset, Emotion, Gender, SplitPlan, UtteranceRecord};
pub use dsp::{FeatureKind, FeatureMatrix, FeatureTensor};
pub use error::{Error, Result};
pub use eval::{ConfusionMatrix, MetricsReport};
pub use model::{Model, ModelConfig};
pub use train::{TrainConfig, TrainHistory};

/// Canonical sample rate every clip is resampled to before feature extraction.
pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;
