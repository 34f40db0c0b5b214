use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AudioError, Emotion, UtteranceRecord};

/// Smallest class size that can be spread over train/validation/test.
const MIN_STRATUM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<(), AudioError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
            return Err(AudioError::BadSplit(format!(
                "ratios must be positive: {parts:?}"
            )));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(AudioError::BadSplit(format!(
                "ratios must sum to 1: {parts:?}"
            )));
        }
        Ok(())
    }
}

/// Indices into the record list for each subset.
///
/// `stratified` is false when some emotion class was too small to stratify and
/// the split fell back to a plain shuffle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitPlan {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("split plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AudioError> {
        serde_json::from_str(text).map_err(|e| AudioError::BadSplit(e.to_string()))
    }
}

/// Seeded, emotion-stratified train/validation/test split.
pub fn split_dataset(
    records: &[UtteranceRecord],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitPlan, AudioError> {
    if records.is_empty() {
        return Err(AudioError::BadSplit("no records to split".into()));
    }
    ratios.validate()?;
    let n = records.len();
    let n_val = (n as f64 * ratios.validation).round() as usize;
    let n_test = (n as f64 * ratios.test).round() as usize;
    if n_val + n_test > n {
        return Err(AudioError::BadSplit(format!(
            "{n} records cannot hold {n_val} validation + {n_test} test"
        )));
    }
    let all: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train, validation, test, stratified) =
        stratified_three_way(records, &all, n_val, n_test, &mut rng);
    Ok(SplitPlan {
        train,
        validation,
        test,
        seed,
        stratified,
    })
}

/// `k` stratified folds; each fold's remainder is split train:validation at 8:1.
pub fn kfold_partitions(
    records: &[UtteranceRecord],
    k: usize,
    seed: u64,
) -> Result<Vec<SplitPlan>, AudioError> {
    if k < 2 {
        return Err(AudioError::BadSplit(format!("k must be >= 2, got {k}")));
    }
    if records.len() < k {
        return Err(AudioError::BadSplit(format!(
            "{} records cannot form {k} folds",
            records.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = group_by_emotion(records, &(0..records.len()).collect::<Vec<_>>());
    let stratified = groups.values().all(|g| g.len() >= MIN_STRATUM);
    let order: Vec<usize> = if stratified {
        groups
            .into_values()
            .flat_map(|mut g| {
                g.shuffle(&mut rng);
                g
            })
            .collect()
    } else {
        let mut all: Vec<usize> = (0..records.len()).collect();
        all.shuffle(&mut rng);
        all
    };
    let mut folds = vec![Vec::new(); k];
    for (pos, idx) in order.into_iter().enumerate() {
        folds[pos % k].push(idx);
    }

    let mut plans = Vec::with_capacity(k);
    for (f, test) in folds.iter().enumerate() {
        let fold_seed = seed.wrapping_add(f as u64);
        let mut rest: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        rest.sort_unstable();
        let n_val = (rest.len() as f64 / 9.0).round() as usize;
        let mut fold_rng = ChaCha8Rng::seed_from_u64(fold_seed);
        let (train, validation, _, inner_strat) =
            stratified_three_way(records, &rest, n_val, 0, &mut fold_rng);
        let mut test = test.clone();
        test.sort_unstable();
        plans.push(SplitPlan {
            train,
            validation,
            test,
            seed: fold_seed,
            stratified: stratified && inner_strat,
        });
    }
    Ok(plans)
}

fn group_by_emotion(records: &[UtteranceRecord], subset: &[usize]) -> BTreeMap<Emotion, Vec<usize>> {
    let mut groups: BTreeMap<Emotion, Vec<usize>> = BTreeMap::new();
    for &i in subset {
        groups.entry(records[i].emotion).or_default().push(i);
    }
    groups
}

/// Splits `subset` into (train, validation, test) with the given validation and
/// test sizes, stratified by emotion when every class has enough members.
fn stratified_three_way(
    records: &[UtteranceRecord],
    subset: &[usize],
    n_val: usize,
    n_test: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>, Vec<usize>, bool) {
    let groups = group_by_emotion(records, subset);
    let stratified = groups.values().all(|g| g.len() >= MIN_STRATUM);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    if stratified {
        let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
        for g in &mut groups {
            g.shuffle(rng);
        }
        let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        let test_q = apportion(n_test, &sizes, &sizes);
        let caps: Vec<usize> = sizes.iter().zip(&test_q).map(|(s, t)| s - t).collect();
        let val_q = apportion(n_val, &sizes, &caps);
        for ((g, &t), &v) in groups.iter().zip(&test_q).zip(&val_q) {
            test.extend_from_slice(&g[..t]);
            val.extend_from_slice(&g[t..t + v]);
            train.extend_from_slice(&g[t + v..]);
        }
    } else {
        let mut all = subset.to_vec();
        all.shuffle(rng);
        test.extend_from_slice(&all[..n_test]);
        val.extend_from_slice(&all[n_test..n_test + n_val]);
        train.extend_from_slice(&all[n_test + n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    (train, val, test, stratified)
}

/// Largest-remainder apportionment of `total` seats proportional to `weights`,
/// never exceeding `caps`. Ties go to the earlier class.
fn apportion(total: usize, weights: &[usize], caps: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    if sum == 0 || total == 0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights
        .iter()
        .map(|&w| total as f64 * w as f64 / sum as f64)
        .collect();
    let mut seats: Vec<usize> = quotas
        .iter()
        .zip(caps)
        .map(|(q, &c)| (q.floor() as usize).min(c))
        .collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut left = total.saturating_sub(seats.iter().sum());
    while left > 0 {
        let mut gave = false;
        for &i in &order {
            if left == 0 {
                break;
            }
            if seats[i] < caps[i] {
                seats[i] += 1;
                left -= 1;
                gave = true;
            }
        }
        if !gave {
            break;
        }
    }
    seats
}
