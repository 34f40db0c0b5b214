//! Raw-audio preparation: voice activity detection, bias-frame rejection and
//! augmentation (noise, pitch, spectrogram masking).

mod augment;
mod bias;
mod pitch;
mod vad;

use thiserror::Error;

pub use augment::{add_noise, spec_augment, AugmentRecipe, AugmentSpec, Variant};
pub use bias::{clean_bias_frames, excise_frames, BIAS_THRESHOLD};
pub use pitch::{pitch_shift, time_stretch_to};
pub use vad::{detect_voice_frames, trim_to_voice, FrameMask, VadConfig};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("clip has {len} samples, fewer than one frame of {frame_len}")]
    ClipTooShort { len: usize, frame_len: usize },
    #[error("no voiced frames")]
    NoVoicedFrames,
    #[error("clip is silent; cannot set an SNR")]
    SilentClip,
    #[error("{axis} mask width {width} must be smaller than dimension {dim}")]
    MaskTooWide {
        axis: &'static str,
        width: usize,
        dim: usize,
    },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}
