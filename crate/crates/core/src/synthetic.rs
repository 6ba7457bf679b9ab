//! Two-Gaussian-blob generator for experiments that need a controllable
//! imbalanced dataset without access to a real malware corpus.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{round_half_up, Dataset, Label, SparseRow};
use crate::error::{Error, Result};

/// Negatives are drawn around the origin and positives around a centre
/// `separation` away along the main diagonal, both with unit-free isotropic
/// spread `std`. Smaller `separation / std` means more class overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobConfig {
    pub n: usize,
    /// Negatives per positive.
    pub imbalance_ratio: f64,
    pub dim: usize,
    pub separation: f64,
    pub std: f64,
    pub seed: u64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        BlobConfig {
            n: 2000,
            imbalance_ratio: 20.0,
            dim: 2,
            separation: 2.5,
            std: 1.0,
            seed: 0,
        }
    }
}

pub fn gaussian_blobs(cfg: &BlobConfig) -> Result<Dataset> {
    if cfg.dim == 0 || cfg.n < 2 {
        return Err(Error::Config("blobs need dim >= 1 and n >= 2".into()));
    }
    if !(cfg.imbalance_ratio >= 1.0 && cfg.imbalance_ratio.is_finite()) {
        return Err(Error::Config(format!(
            "imbalance ratio must be >= 1, got {}",
            cfg.imbalance_ratio
        )));
    }
    let normal = Normal::new(0.0, cfg.std)
        .map_err(|e| Error::Config(format!("invalid blob spread: {e}")))?;
    let positives = round_half_up(cfg.n as f64 / (cfg.imbalance_ratio + 1.0)).clamp(1, cfg.n - 1);
    let offset = cfg.separation / (cfg.dim as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let label = if i < cfg.n - positives {
            Label::Negative
        } else {
            Label::Positive
        };
        let shift = if label == Label::Positive {
            offset
        } else {
            0.0
        };
        let dense: Vec<f64> = (0..cfg.dim)
            .map(|_| shift + normal.sample(&mut rng))
            .collect();
        rows.push(SparseRow::from_dense(&dense));
        labels.push(label);
    }
    Dataset::new(rows, labels, cfg.dim)
}
