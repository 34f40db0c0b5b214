use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::audio_io::AudioClip;
use crate::dsp::FeatureTensor;

/// Adds white Gaussian noise at exactly `snr_db` relative to the clip power.
///
/// `f64::INFINITY` means no noise. Output is clipped to [-1, 1].
pub fn add_noise(clip: &AudioClip, snr_db: f64, seed: u64) -> Result<AudioClip, PreprocessError> {
    if snr_db == f64::INFINITY {
        return Ok(clip.clone());
    }
    if !snr_db.is_finite() {
        return Err(PreprocessError::BadParameter(format!("snr_db {snr_db}")));
    }
    let p_signal = clip.power();
    if p_signal <= 0.0 {
        return Err(PreprocessError::SilentClip);
    }
    let p_noise = p_signal / 10f64.powf(snr_db / 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise: Vec<f64> = (0..clip.len()).map(|_| rng.sample(StandardNormal)).collect();
    let drawn = noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64;
    let scale = (p_noise / drawn).sqrt();
    noise.iter_mut().for_each(|v| *v *= scale);
    let samples = clip
        .samples
        .iter()
        .zip(&noise)
        .map(|(&s, &n)| (s as f64 + n).clamp(-1.0, 1.0) as f32)
        .collect();
    Ok(clip.map_samples(samples))
}

/// Augmentation parameters for one clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub noise_snr_db: f64,
    pub pitch_semitones: f64,
    pub n_time_masks: usize,
    pub time_mask_max: usize,
    pub n_freq_masks: usize,
    pub freq_mask_max: usize,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            noise_snr_db: f64::INFINITY,
            pitch_semitones: 0.0,
            n_time_masks: 2,
            time_mask_max: 20,
            n_freq_masks: 2,
            freq_mask_max: 6,
            seed: 0,
        }
    }
}

/// SpecAugment-style masking: random time spans and frequency bands are set to
/// the tensor mean. Deterministic in `spec.seed`.
pub fn spec_augment(tensor: &FeatureTensor, spec: &AugmentSpec) -> Result<FeatureTensor, PreprocessError> {
    if spec.n_time_masks > 0 && spec.time_mask_max >= tensor.frames {
        return Err(PreprocessError::MaskTooWide {
            axis: "time",
            width: spec.time_mask_max,
            dim: tensor.frames,
        });
    }
    if spec.n_freq_masks > 0 && spec.freq_mask_max >= tensor.height {
        return Err(PreprocessError::MaskTooWide {
            axis: "frequency",
            width: spec.freq_mask_max,
            dim: tensor.height,
        });
    }
    let mut out = tensor.clone();
    if spec.n_time_masks == 0 && spec.n_freq_masks == 0 {
        return Ok(out);
    }
    let fill = tensor.mean();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (h, f) = (tensor.height, tensor.frames);
    for _ in 0..spec.n_time_masks {
        let width = rng.random_range(0..=spec.time_mask_max);
        let start = rng.random_range(0..=f - width);
        for c in 0..tensor.channels {
            for row in 0..h {
                let base = (c * h + row) * f;
                out.values[base + start..base + start + width].fill(fill);
            }
        }
    }
    for _ in 0..spec.n_freq_masks {
        let width = rng.random_range(0..=spec.freq_mask_max);
        let start = rng.random_range(0..=h - width);
        for c in 0..tensor.channels {
            for row in start..start + width {
                let base = (c * h + row) * f;
                out.values[base..base + f].fill(fill);
            }
        }
    }
    Ok(out)
}

/// One member of the augmentation recipe; also the provenance tag of the
/// features it produces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Variant {
    Clean,
    Noise { snr_db: f64 },
    Pitch { semitones: f64 },
    SpecAugment,
}

impl Variant {
    pub fn is_clean(&self) -> bool {
        matches!(self, Variant::Clean)
    }

    pub fn label(&self) -> String {
        match self {
            Variant::Clean => "clean".into(),
            Variant::Noise { snr_db } => format!("noise{snr_db}db"),
            Variant::Pitch { semitones } => format!("pitch{semitones:+}"),
            Variant::SpecAugment => "specaug".into(),
        }
    }
}

/// Which augmented copies of each training clip to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecipe {
    pub noise_snr_db: Vec<f64>,
    pub pitch_semitones: Vec<f64>,
    pub spec_augment: Option<AugmentSpec>,
}

impl Default for AugmentRecipe {
    /// clean, noise at 20 and 10 dB, pitch +/-2 semitones, spectrogram masking
    fn default() -> Self {
        Self {
            noise_snr_db: vec![20.0, 10.0],
            pitch_semitones: vec![2.0, -2.0],
            spec_augment: Some(AugmentSpec::default()),
        }
    }
}

impl AugmentRecipe {
    pub fn none() -> Self {
        Self {
            noise_snr_db: Vec::new(),
            pitch_semitones: Vec::new(),
            spec_augment: None,
        }
    }

    /// All variants, clean first.
    pub fn variants(&self) -> Vec<Variant> {
        let mut v = vec![Variant::Clean];
        v.extend(self.noise_snr_db.iter().map(|&snr_db| Variant::Noise { snr_db }));
        v.extend(self.pitch_semitones.iter().map(|&semitones| Variant::Pitch { semitones }));
        if self.spec_augment.is_some() {
            v.push(Variant::SpecAugment);
        }
        v
    }

    pub fn multiplier(&self) -> usize {
        self.variants().len()
    }
}
