//! Run configuration: one `key = value` file shared by every subcommand.
//!
//! ```text
//! [run]       seed, k, augment, joint_gender, parallel_folds
//! [augment]   noise_snr_db, pitch_semitones, spec_augment, time_masks, ...
//! [features]  see PipelineConfig
//! [vad]       see PipelineConfig
//! [train]     see TrainConfig
//! [model] [mfl.N] [sfl.N] [erfd]   see ModelConfig
//! ```

use std::path::Path;

use crate::config_file::{ConfigDoc, ConfigError};
use crate::dsp::FeatureKind;
use crate::model::ModelConfig;
use crate::pipeline::PipelineConfig;
use crate::preprocess::{AugmentRecipe, AugmentSpec};
use crate::train::TrainConfig;

const RUN_KEYS: [&str; 5] = ["seed", "k", "augment", "joint_gender", "parallel_folds"];
const AUGMENT_KEYS: [&str; 7] = [
    "noise_snr_db",
    "pitch_semitones",
    "spec_augment",
    "time_masks",
    "time_mask_max",
    "freq_masks",
    "freq_mask_max",
];

fn is_model_section(s: &str) -> bool {
    matches!(s, "model" | "input" | "erfd")
        || s.strip_prefix("mfl.").is_some_and(|i| i.parse::<usize>().is_ok())
        || s.strip_prefix("sfl.").is_some_and(|i| i.parse::<usize>().is_ok())
}

/// Augmentation settings from `[augment]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSettings {
    pub enabled: bool,
    pub recipe: AugmentRecipe,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub doc: ConfigDoc,
    pub seed: u64,
    pub k: usize,
    pub joint_gender: bool,
    pub parallel_folds: bool,
    pub augment: AugmentSettings,
    pub train: TrainConfig,
}

fn parse_list(doc: &ConfigDoc, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
    match doc.get::<String>("augment", key)? {
        None => Ok(default.to_vec()),
        Some(v) if v.trim().is_empty() || v.trim() == "none" => Ok(Vec::new()),
        Some(v) => v
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|e| doc.bad_value("augment", key, format!("'{}': {e}", x.trim())))
            })
            .collect(),
    }
}

impl RunConfig {
    /// Loads `path` (or an empty config) and applies `--set` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc = match path {
            Some(p) => ConfigDoc::from_file(p)?,
            None => ConfigDoc::parse("", "<defaults>")?,
        };
        for o in overrides {
            doc.apply_override(o)?;
        }
        Self::from_doc(doc)
    }

    pub fn from_doc(doc: ConfigDoc) -> Result<Self, ConfigError> {
        doc.check_sections(|s| {
            matches!(s, "" | "run" | "augment" | "features" | "vad" | "train") || is_model_section(s)
        })?;
        doc.check_keys("", &[])?;
        doc.check_keys("run", &RUN_KEYS)?;
        let seed: u64 = doc.get_or("run", "seed", 0)?;
        let k: usize = doc.get_or("run", "k", 5)?;
        if k < 2 {
            return Err(doc.bad_value("run", "k", "k must be >= 2"));
        }

        doc.check_keys("augment", &AUGMENT_KEYS)?;
        let d = AugmentRecipe::default();
        let mut spec = AugmentSpec::default();
        spec.n_time_masks = doc.get_or("augment", "time_masks", spec.n_time_masks)?;
        spec.time_mask_max = doc.get_or("augment", "time_mask_max", spec.time_mask_max)?;
        spec.n_freq_masks = doc.get_or("augment", "freq_masks", spec.n_freq_masks)?;
        spec.freq_mask_max = doc.get_or("augment", "freq_mask_max", spec.freq_mask_max)?;
        let recipe = AugmentRecipe {
            noise_snr_db: parse_list(&doc, "noise_snr_db", &d.noise_snr_db)?,
            pitch_semitones: parse_list(&doc, "pitch_semitones", &d.pitch_semitones)?,
            spec_augment: doc
                .get_or("augment", "spec_augment", true)?
                .then_some(spec),
        };
        if recipe.noise_snr_db.iter().any(|s| !s.is_finite()) {
            return Err(doc.bad_value("augment", "noise_snr_db", "SNR values must be finite"));
        }

        let mut train = TrainConfig::from_doc(&doc)?;
        if doc.entry("train", "seed").is_none() {
            train.seed = seed;
        }
        Ok(Self {
            seed,
            k,
            joint_gender: doc.get_or("run", "joint_gender", false)?,
            parallel_folds: doc.get_or("run", "parallel_folds", false)?,
            augment: AugmentSettings {
                enabled: doc.get_or("run", "augment", false)?,
                recipe,
            },
            train,
            doc,
        })
    }

    pub fn pipeline(&self, kind: FeatureKind) -> Result<PipelineConfig, ConfigError> {
        PipelineConfig::from_doc(&self.doc, kind)
    }

    /// Model config from `model_path` if given, else from the model sections
    /// of the run config. Input shape and class count come from the data and
    /// must agree with any values the file sets explicitly.
    pub fn model(
        &self,
        model_path: Option<&Path>,
        overrides: &[String],
        input: (usize, usize, usize),
        n_classes: usize,
    ) -> Result<ModelConfig, ConfigError> {
        let mut doc = match model_path {
            Some(p) => {
                let mut d = ConfigDoc::from_file(p)?;
                for o in overrides {
                    let section = o.split('=').next().unwrap_or("").rsplit_once('.').map(|x| x.0);
                    if section.is_some_and(is_model_section) {
                        d.apply_override(o)?;
                    }
                }
                d
            }
            None => ConfigDoc {
                origin: self.doc.origin.clone(),
                sections: self
                    .doc
                    .sections
                    .iter()
                    .filter(|s| is_model_section(&s.name))
                    .cloned()
                    .collect(),
            },
        };
        let expect = [
            ("input", "channels", input.0),
            ("input", "height", input.1),
            ("input", "frames", input.2),
            ("erfd", "n_classes", n_classes),
        ];
        for (sec, key, want) in expect {
            match doc.get::<usize>(sec, key)? {
                Some(v) if v != want => {
                    return Err(doc.bad_value(
                        sec,
                        key,
                        format!("{v} disagrees with the data, which gives {want}"),
                    ))
                }
                Some(_) => {}
                None => doc.set(sec, key, &want.to_string()),
            }
        }
        if doc.entry("model", "seed").is_none() {
            doc.set("model", "seed", &self.seed.to_string());
        }
        ModelConfig::from_doc(&doc)
    }
}
