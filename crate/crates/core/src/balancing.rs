//! Bootstrap sampling, SMOTE oversampling, and Bootstrap-Based Balancing
//! (BBB): every bootstrap of the training set is balanced on its own before a
//! pool member is trained on it, so the training set itself is never
//! balanced globally.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label, SparseRow};
use crate::error::{Error, Result};
use crate::neighbors::nearest_in_subset;

/// Redraw budget for a bootstrap that misses one class entirely.
pub const MAX_BOOTSTRAP_ATTEMPTS: u64 = 100;

/// Row indices drawn with replacement from a source dataset, plus the SMOTE
/// balanced view when one was built.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSample {
    pub rows: Vec<usize>,
    pub seed: u64,
    /// Number of draws it took to get both classes (1 when the first draw did).
    pub attempts: u64,
    pub balanced_view: Option<Dataset>,
}

impl BootstrapSample {
    pub fn materialize(&self, source: &Dataset) -> Dataset {
        source.subset(&self.rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoteTarget {
    /// Raise the minority class to the majority count.
    #[default]
    Equalize,
}

/// Which bootstrap rows BBB hands to SMOTE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapRows {
    /// Every draw, repeats included. A repeated minority row is its own
    /// nearest neighbour, so some synthetic rows coincide with it.
    #[default]
    AsDrawn,
    /// Each distinct row once.
    Deduplicated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub target: SmoteTarget,
    pub seed: u64,
    /// Only read by BBB.
    pub bootstrap_rows: BootstrapRows,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            target: SmoteTarget::Equalize,
            seed: 0,
            bootstrap_rows: BootstrapRows::AsDrawn,
        }
    }
}

/// Uniform sample with replacement, same size as `data`.
pub fn bootstrap(data: &Dataset, seed: u64) -> Result<BootstrapSample> {
    if data.is_empty() {
        return Err(Error::Data("cannot bootstrap an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.len();
    let rows = (0..n).map(|_| rng.random_range(0..n)).collect();
    Ok(BootstrapSample {
        rows,
        seed,
        attempts: 1,
        balanced_view: None,
    })
}

/// `a + gap * (b - a)` over the union of both rows' non-zeros.
pub fn interpolate(a: &SparseRow, b: &SparseRow, gap: f64) -> SparseRow {
    let mut indices = Vec::with_capacity(a.nnz().max(b.nnz()));
    let mut values = Vec::with_capacity(indices.capacity());
    let mut push = |i: u32, x: f64, y: f64| {
        let v = x + gap * (y - x);
        if v != 0.0 {
            indices.push(i);
            values.push(v);
        }
    };
    let (ai, av) = (a.indices(), a.values());
    let (bi, bv) = (b.indices(), b.values());
    let (mut p, mut q) = (0, 0);
    while p < ai.len() || q < bi.len() {
        if q == bi.len() || (p < ai.len() && ai[p] < bi[q]) {
            push(ai[p], av[p], 0.0);
            p += 1;
        } else if p == ai.len() || bi[q] < ai[p] {
            push(bi[q], 0.0, bv[q]);
            q += 1;
        } else {
            push(ai[p], av[p], bv[q]);
            p += 1;
            q += 1;
        }
    }
    SparseRow::new(indices, values).expect("interpolation of valid rows is valid")
}

/// Oversamples the minority class until both classes have the same count.
///
/// Each synthetic row is `x + g * (x_nn - x)` for a random minority row `x`,
/// one of its `k` nearest minority neighbours `x_nn`, and `g` uniform in
/// `[0, 1)`. Original rows are kept unchanged and in order; synthetic rows
/// are appended.
pub fn smote(data: &Dataset, config: &SmoteConfig) -> Result<Dataset> {
    if config.k_neighbors == 0 {
        return Err(Error::Config("SMOTE k_neighbors must be at least 1".into()));
    }
    let counts = data.class_counts();
    if counts.negative == 0 || counts.positive == 0 {
        return Err(Error::Config(
            "SMOTE needs at least one instance of each class".into(),
        ));
    }
    let Some(minority) = counts.minority() else {
        return Ok(data.clone());
    };
    let deficit = counts.get(minority.other()) - counts.get(minority);
    let minority_ids = data.indices_of(minority);
    let m = minority_ids.len();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = data.clone();

    if m == 1 {
        let row = data.row(minority_ids[0]);
        for _ in 0..deficit {
            out.push(row.clone(), minority);
        }
        return Ok(out);
    }

    let k = config.k_neighbors.min(m - 1);
    let neighbors: Vec<Vec<usize>> = minority_ids
        .par_iter()
        .enumerate()
        .map(|(pos, &row)| {
            nearest_in_subset(data.rows(), &minority_ids, data.row(row), k, Some(pos))
                .into_iter()
                .map(|n| minority_ids[n.index])
                .collect()
        })
        .collect();

    for _ in 0..deficit {
        let pos = rng.random_range(0..m);
        let nn = neighbors[pos][rng.random_range(0..k)];
        let gap: f64 = rng.random();
        out.push(
            interpolate(data.row(minority_ids[pos]), data.row(nn), gap),
            minority,
        );
    }
    Ok(out)
}

/// SMOTE applied once to the whole training set: the conventional baseline
/// that BBB is compared against.
pub fn whole_set_balance(train: &Dataset, config: &SmoteConfig) -> Result<Dataset> {
    smote(train, config)
}

/// Seed for bootstrap `member` on its `attempt`-th draw. First draws use
/// `seed + member`; redraws step by `n` so they never reuse another member's
/// first-draw seed.
pub fn bootstrap_seed(seed: u64, member: usize, n: usize, attempt: u64) -> u64 {
    seed.wrapping_add(member as u64)
        .wrapping_add(attempt.wrapping_mul(n as u64))
}

fn has_both_classes(sample: &BootstrapSample, source: &Dataset) -> bool {
    let mut seen = [false; 2];
    for &r in &sample.rows {
        seen[source.label(r).index()] = true;
        if seen == [true, true] {
            return true;
        }
    }
    false
}

/// Draws a bootstrap with both classes for pool member `member`, redrawing
/// up to [`MAX_BOOTSTRAP_ATTEMPTS`] times.
pub fn two_class_bootstrap(
    train: &Dataset,
    member: usize,
    n: usize,
    seed: u64,
) -> Result<BootstrapSample> {
    for attempt in 0..MAX_BOOTSTRAP_ATTEMPTS {
        let mut sample = bootstrap(train, bootstrap_seed(seed, member, n, attempt))?;
        if has_both_classes(&sample, train) {
            sample.attempts = attempt + 1;
            return Ok(sample);
        }
    }
    Err(Error::Data(format!(
        "bootstrap {member} drew a single class in {MAX_BOOTSTRAP_ATTEMPTS} attempts"
    )))
}

/// Bootstrap-Based Balancing: `n` bootstraps with seeds `seed + i`, each
/// balanced independently by SMOTE. `train` is only read.
pub fn bbb_generate(
    train: &Dataset,
    n: usize,
    smote_cfg: &SmoteConfig,
    seed: u64,
) -> Result<Vec<BootstrapSample>> {
    if n == 0 {
        return Err(Error::Config("BBB needs at least one bootstrap".into()));
    }
    let counts = train.class_counts();
    if counts.negative == 0 || counts.positive == 0 {
        return Err(Error::Config(
            "BBB needs both classes in the training set".into(),
        ));
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut sample = two_class_bootstrap(train, i, n, seed)?;
            let cfg = SmoteConfig {
                seed: smote_cfg.seed.wrapping_add(sample.seed),
                ..*smote_cfg
            };
            let drawn = match smote_cfg.bootstrap_rows {
                BootstrapRows::AsDrawn => sample.materialize(train),
                BootstrapRows::Deduplicated => {
                    let mut unique = sample.rows.clone();
                    unique.sort_unstable();
                    unique.dedup();
                    train.subset(&unique)
                }
            };
            sample.balanced_view = Some(smote(&drawn, &cfg)?);
            Ok(sample)
        })
        .collect()
}

/// Which class a balanced view raised, if any.
pub fn oversampled_class(before: &Dataset) -> Option<Label> {
    before.class_counts().minority()
}
