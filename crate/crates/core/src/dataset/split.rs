use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Label};
use crate::error::{Error, Result};

/// Train/test partition of a source dataset. Both index lists refer to rows
/// of the source and are kept in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// `round(x)` with halves going up, for non-negative `x`.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

fn test_count(class_count: usize, fraction: f64) -> usize {
    let mut t = round_half_up(class_count as f64 * fraction);
    if class_count >= 2 {
        t = t.max(1);
    }
    t.min(class_count.saturating_sub(1))
}

/// Per-class random split. Each class sends `round(count * test_fraction)`
/// rows to the test side, clamped so that train always keeps one row and test
/// gets one whenever the class has at least two.
pub fn stratified_split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let counts = data.class_counts();
    if counts.positive == 0 || counts.negative == 0 {
        return Err(Error::Config(
            "stratified split needs at least one instance of each class".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_indices = Vec::with_capacity(data.len());
    let mut test_indices = Vec::new();
    for label in Label::ALL {
        let mut idx = data.indices_of(label);
        let t = test_count(idx.len(), test_fraction);
        idx.shuffle(&mut rng);
        test_indices.extend_from_slice(&idx[..t]);
        train_indices.extend_from_slice(&idx[t..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();

    Ok(SplitPair {
        train: data.subset(&train_indices),
        test: data.subset(&test_indices),
        train_indices,
        test_indices,
        seed,
    })
}
