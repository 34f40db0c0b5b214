use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ser_core::model::{LflbConfig, ModelConfig, ResLflbConfig};
use ser_core::train::LabeledSet;
use ser_core::{Dataset, Gender, UtteranceRecord};

/// EMODB class sizes in `Dataset::Emodb.emotions()` order; they sum to 535.
pub const EMODB_CLASS_SIZES: [usize; 7] = [71, 62, 127, 79, 69, 81, 46];

pub fn emodb_like_records() -> Vec<UtteranceRecord> {
    let mut out = Vec::new();
    for (e, &n) in Dataset::Emodb.emotions().iter().zip(&EMODB_CLASS_SIZES) {
        for i in 0..n {
            out.push(UtteranceRecord {
                clip_path: format!("{}/{i:03}.wav", e.name()),
                dataset: Dataset::Emodb,
                emotion: *e,
                gender: if i % 2 == 0 { Gender::Male } else { Gender::Female },
                speaker_id: format!("{:02}", i % 10),
            });
        }
    }
    out
}

/// A small network with every block kind, sized for `[1, 16, 16]` inputs.
pub fn tiny_model(n_classes: usize, seed: u64) -> ModelConfig {
    let mut cfg = ModelConfig::for_input(1, 16, 16, n_classes);
    cfg.mfl = vec![LflbConfig::new(4), LflbConfig::new(8)];
    cfg.sfl = vec![ResLflbConfig::new(8), ResLflbConfig::new(16)];
    cfg.seed = seed;
    cfg
}

/// Two Gaussian clouds on either side of a random hyperplane.
pub fn separable_set(n: usize, shape: [usize; 3], seed: u64) -> LabeledSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len: usize = shape.iter().product();
    let dir: Vec<f32> = (0..len).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let mut set = LabeledSet::new(shape);
    for i in 0..n {
        let label = i % 2;
        let sign = if label == 0 { 1.0 } else { -1.0 };
        let x: Vec<f32> = dir
            .iter()
            .map(|d| sign * d + 0.3 * rng.random_range(-1.0f32..1.0))
            .collect();
        set.push((shape[0], shape[1], shape[2]), &x, label).expect("shape");
    }
    set
}
