//! Clip-to-feature pipeline and the on-disk feature cache.
//!
//! Per clip: load, resample to 16 kHz, trim to the voiced region, drop bias
//! frames, compute LMS or LMSDDC, fix the frame count.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio_io::{load_wav, resample, AudioClip, UtteranceRecord};
use crate::config_file::{ConfigDoc, ConfigError};
use crate::dsp::{extract_features, read_serf_file, write_serf_file, FeatureConfig, FeatureKind, FeatureTensor};
use crate::error::{Error, Result};
use crate::preprocess::{
    add_noise, clean_bias_frames, detect_voice_frames, excise_frames, pitch_shift, spec_augment,
    trim_to_voice, AugmentRecipe, AugmentSpec, FrameMask, VadConfig, Variant,
};
use crate::train::{FeatureSource, TaggedFeature, TrainError};

/// Environment variable overriding the feature cache root.
pub const CACHE_ENV: &str = "SER_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub kind: FeatureKind,
    pub features: FeatureConfig,
    pub vad: VadConfig,
    pub bias_clean: bool,
}

impl PipelineConfig {
    pub fn new(kind: FeatureKind) -> Self {
        Self {
            kind,
            features: FeatureConfig::default(),
            vad: VadConfig::default(),
            bias_clean: true,
        }
    }

    /// Network input `(channels, height, frames)` produced by this config.
    pub fn input_shape(&self) -> (usize, usize, usize) {
        (1, self.features.height(self.kind), self.features.target_frames)
    }

    /// Short stable hash of every setting that affects clean features.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("pipeline config serializes");
        hex16(text.as_bytes())
    }

    pub const FEATURE_KEYS: [&'static str; 9] = [
        "fft_size",
        "hop",
        "window_len",
        "n_mels",
        "fmin",
        "fmax",
        "n_mfcc",
        "target_frames",
        "sample_rate",
    ];

    /// Reads `[features]` and `[vad]` on top of the defaults for `kind`.
    pub fn from_doc(doc: &ConfigDoc, kind: FeatureKind) -> std::result::Result<Self, ConfigError> {
        let mut cfg = Self::new(kind);
        let s = "features";
        doc.check_keys(s, &Self::FEATURE_KEYS)?;
        let f = &mut cfg.features;
        f.stft.fft_size = doc.get_or(s, "fft_size", f.stft.fft_size)?;
        f.stft.hop = doc.get_or(s, "hop", f.stft.hop)?;
        f.stft.window_len = doc.get_or(s, "window_len", f.stft.window_len)?;
        f.mel.n_mels = doc.get_or(s, "n_mels", f.mel.n_mels)?;
        f.mel.fmin = doc.get_or(s, "fmin", f.mel.fmin)?;
        f.mel.fmax = doc.get_or(s, "fmax", f.mel.fmax)?;
        f.n_mfcc = doc.get_or(s, "n_mfcc", f.n_mfcc)?;
        f.target_frames = doc.get_or(s, "target_frames", f.target_frames)?;
        f.sample_rate = doc.get_or(s, "sample_rate", f.sample_rate)?;
        f.stft
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("{}: [features] {e}", doc.origin)))?;
        if f.target_frames == 0 || f.mel.n_mels == 0 {
            return Err(doc.bad_value(s, "target_frames", "feature dimensions must be >= 1"));
        }
        let v = "vad";
        doc.check_keys(v, &["frame_len", "hop", "threshold_ratio", "bias_clean"])?;
        cfg.vad.frame_len = doc.get_or(v, "frame_len", cfg.vad.frame_len)?;
        cfg.vad.hop = doc.get_or(v, "hop", cfg.vad.hop)?;
        cfg.vad.threshold_ratio = doc.get_or(v, "threshold_ratio", cfg.vad.threshold_ratio)?;
        cfg.bias_clean = doc.get_or(v, "bias_clean", cfg.bias_clean)?;
        if cfg.vad.frame_len == 0 || cfg.vad.hop == 0 {
            return Err(doc.bad_value(v, "frame_len", "VAD frame and hop must be >= 1"));
        }
        Ok(cfg)
    }
}

/// First 16 hex digits of SHA-256.
pub fn hex16(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Resampled, voice-trimmed and bias-cleaned clip.
pub fn prepare_clip(clip: &AudioClip, cfg: &PipelineConfig) -> Result<AudioClip> {
    let clip = resample(clip, cfg.features.sample_rate)?;
    let mask = detect_voice_frames(&clip, cfg.vad.frame_len, cfg.vad.hop, cfg.vad.threshold_ratio)?;
    let trimmed = trim_to_voice(&clip, &mask)?;
    if !cfg.bias_clean || trimmed.len() < cfg.vad.frame_len {
        return Ok(trimmed);
    }
    let n_frames = (trimmed.len() - cfg.vad.frame_len) / cfg.vad.hop + 1;
    let all = FrameMask {
        frame_len: cfg.vad.frame_len,
        hop: cfg.vad.hop,
        voiced: vec![true; n_frames],
    };
    let cleaned = clean_bias_frames(&trimmed, &all);
    Ok(excise_frames(&trimmed, &all, &cleaned))
}

pub fn load_prepared(path: &Path, cfg: &PipelineConfig) -> Result<AudioClip> {
    prepare_clip(&load_wav(path)?, cfg)
}

/// Feature tensor for one augmentation variant of an already prepared clip.
pub fn variant_features(
    prepared: &AudioClip,
    variant: Variant,
    cfg: &PipelineConfig,
    spec: &AugmentSpec,
    seed: u64,
) -> Result<FeatureTensor> {
    let f = &cfg.features;
    Ok(match variant {
        Variant::Clean => extract_features(prepared, cfg.kind, f)?,
        Variant::Noise { snr_db } => extract_features(&add_noise(prepared, snr_db, seed)?, cfg.kind, f)?,
        Variant::Pitch { semitones } => {
            extract_features(&pitch_shift(prepared, semitones)?, cfg.kind, f)?
        }
        Variant::SpecAugment => {
            let clean = extract_features(prepared, cfg.kind, f)?;
            spec_augment(&clean, &AugmentSpec { seed, ..*spec })?
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub clip_path: String,
    pub variant: Variant,
    pub config_hash: String,
    pub kind: String,
}

/// Feature cache under `<root>/<kind>-<config hash>/`: one SERF file per
/// (clip, variant) plus a JSON sidecar recording where it came from.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    pub dir: PathBuf,
    pub cfg: PipelineConfig,
    pub hash: String,
}

impl FeatureStore {
    pub fn new(root: &Path, cfg: PipelineConfig) -> Self {
        let hash = cfg.hash();
        let dir = root.join(format!("{}-{hash}", cfg.kind.name().to_ascii_lowercase()));
        Self { dir, cfg, hash }
    }

    /// `SER_CACHE_DIR` if set, else `fallback`.
    pub fn default_root(fallback: &Path) -> PathBuf {
        std::env::var_os(CACHE_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| fallback.to_path_buf())
    }

    fn stem(clip_path: &str, variant: &Variant) -> String {
        let name = Path::new(clip_path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "clip".into());
        format!("{name}-{}.{}", &hex16(clip_path.as_bytes())[..8], variant.label())
    }

    pub fn paths(&self, clip_path: &str, variant: &Variant) -> (PathBuf, PathBuf) {
        let stem = Self::stem(clip_path, variant);
        (
            self.dir.join(format!("{stem}.serf")),
            self.dir.join(format!("{stem}.json")),
        )
    }

    /// Cached tensor if present and its sidecar matches.
    pub fn lookup(&self, clip_path: &str, variant: &Variant) -> Result<Option<FeatureTensor>> {
        let (serf, side) = self.paths(clip_path, variant);
        if !serf.exists() || !side.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let prov: Provenance = serde_json::from_str(&text)
            .map_err(|e| Error::Other(format!("{}: bad provenance sidecar: {e}", side.display())))?;
        if prov.clip_path != clip_path || prov.variant != *variant || prov.config_hash != self.hash {
            return Err(TrainError::Provenance(format!(
                "{} records {} / {} / {}, expected {clip_path} / {} / {}",
                side.display(),
                prov.clip_path,
                prov.variant.label(),
                prov.config_hash,
                variant.label(),
                self.hash
            ))
            .into());
        }
        Ok(Some(read_serf_file(&serf)?))
    }

    pub fn store(&self, clip_path: &str, variant: &Variant, t: &FeatureTensor) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let (serf, side) = self.paths(clip_path, variant);
        write_serf_file(&serf, t)?;
        let prov = Provenance {
            clip_path: clip_path.to_string(),
            variant: *variant,
            config_hash: self.hash.clone(),
            kind: self.cfg.kind.name().to_string(),
        };
        let json = serde_json::to_string_pretty(&prov).expect("provenance serializes");
        std::fs::write(&side, json).map_err(|e| Error::io(&side, e))
    }

    /// Writes `config.json` describing the pipeline settings of this cache.
    pub fn write_manifest(&self) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let p = self.dir.join("config.json");
        let json = serde_json::json!({
            "config_hash": self.hash,
            "pipeline": self.cfg,
        });
        std::fs::write(&p, serde_json::to_string_pretty(&json).expect("json"))
            .map_err(|e| Error::io(&p, e))
    }
}

/// Seed for the augmentation of one clip and variant; independent of record order.
pub fn variant_seed(base: u64, clip_path: &str, variant_index: usize) -> u64 {
    let h = crc32fast::hash(clip_path.as_bytes()) as u64;
    base.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (h << 8) ^ variant_index as u64
}

/// [`FeatureSource`] over manifest records, backed by a [`FeatureStore`].
pub struct CachedSource<'a> {
    pub records: &'a [UtteranceRecord],
    pub store: FeatureStore,
    pub recipe: AugmentRecipe,
    pub seed: u64,
    /// Resolves manifest clip paths (relative ones against the manifest dir).
    pub base_dir: Option<PathBuf>,
}

impl CachedSource<'_> {
    fn resolve(&self, clip_path: &str) -> PathBuf {
        let p = PathBuf::from(clip_path);
        match &self.base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        }
    }

    fn get(&self, record: usize, variant: Variant, index: usize) -> Result<FeatureTensor> {
        let r = self.records.get(record).ok_or_else(|| {
            Error::Other(format!("record index {record} out of range"))
        })?;
        if let Some(t) = self.store.lookup(&r.clip_path, &variant)? {
            return Ok(t);
        }
        let prepared = load_prepared(&self.resolve(&r.clip_path), &self.store.cfg)?;
        let spec = self.recipe.spec_augment.unwrap_or_default();
        let t = variant_features(
            &prepared,
            variant,
            &self.store.cfg,
            &spec,
            variant_seed(self.seed, &r.clip_path, index),
        )?;
        self.store.store(&r.clip_path, &variant, &t)?;
        Ok(t)
    }
}

impl FeatureSource for CachedSource<'_> {
    fn clean(&self, record: usize) -> Result<TaggedFeature> {
        Ok(TaggedFeature {
            record,
            variant: Variant::Clean,
            tensor: self.get(record, Variant::Clean, 0)?,
        })
    }

    fn augmented(&self, record: usize) -> Result<Vec<TaggedFeature>> {
        self.recipe
            .variants()
            .into_iter()
            .enumerate()
            .filter(|(_, v)| !v.is_clean())
            .map(|(i, variant)| {
                Ok(TaggedFeature {
                    record,
                    variant,
                    tensor: self.get(record, variant, i)?,
                })
            })
            .collect()
    }
}
