//! Instance hardness via k-Disagreeing Neighbours (KDN): the fraction of an
//! instance's `k` nearest neighbours whose label differs from its own.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::neighbors::nearest_rows;

/// One step of an empirical CDF: fraction of instances with score ≤ `score`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub score: f64,
    pub cumulative_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdnReport {
    pub k: usize,
    /// Disagreeing-neighbour count per instance; the score is `count / k`.
    pub disagreeing: Vec<u32>,
    pub labels: Vec<Label>,
}

impl KdnReport {
    pub fn len(&self) -> usize {
        self.disagreeing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disagreeing.is_empty()
    }

    pub fn score(&self, i: usize) -> f64 {
        self.disagreeing[i] as f64 / self.k as f64
    }

    pub fn scores(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.score(i)).collect()
    }

    /// Mean score of one class, `None` when the class is absent.
    pub fn class_mean(&self, label: Label) -> Option<f64> {
        let (sum, n) = (0..self.len())
            .filter(|&i| self.labels[i] == label)
            .fold((0u64, 0usize), |(s, n), i| {
                (s + self.disagreeing[i] as u64, n + 1)
            });
        (n > 0).then(|| sum as f64 / (n * self.k) as f64)
    }

    /// Step CDF evaluated at every distinct score, over one class or all
    /// instances. Ends at 1.
    pub fn cdf(&self, label: Option<Label>) -> Vec<CdfPoint> {
        let mut hist = vec![0usize; self.k + 1];
        let mut n = 0usize;
        for (i, &c) in self.disagreeing.iter().enumerate() {
            if label.is_none_or(|l| self.labels[i] == l) {
                hist[c as usize] += 1;
                n += 1;
            }
        }
        let mut out = Vec::new();
        let mut acc = 0usize;
        for (c, &h) in hist.iter().enumerate() {
            if h > 0 {
                acc += h;
                out.push(CdfPoint {
                    score: c as f64 / self.k as f64,
                    cumulative_fraction: acc as f64 / n as f64,
                });
            }
        }
        out
    }

    /// `instance_id,class,kdn` rows.
    pub fn write_scores_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(["instance_id", "class", "kdn"])
            .map_err(|e| csv_io(path, e))?;
        for i in 0..self.len() {
            w.write_record([
                i.to_string(),
                self.labels[i].name().to_string(),
                format!("{:.6}", self.score(i)),
            ])
            .map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// `score,cumulative_fraction` rows for one class (or all instances).
    pub fn write_cdf_csv(&self, label: Option<Label>, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(["score", "cumulative_fraction"])
            .map_err(|e| csv_io(path, e))?;
        for p in self.cdf(label) {
            w.write_record([
                format!("{:.6}", p.score),
                format!("{:.6}", p.cumulative_fraction),
            ])
            .map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// KDN score of every instance. Neighbours exclude the instance itself; ties
/// in distance go to the lower row index.
pub fn kdn_scores(data: &Dataset, k: usize) -> Result<KdnReport> {
    if k == 0 {
        return Err(Error::Config("KDN needs k >= 1".into()));
    }
    if data.len() <= k {
        return Err(Error::Config(format!(
            "KDN with k = {k} needs more than {k} instances, got {}",
            data.len()
        )));
    }
    let disagreeing = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let own = data.label(i);
            nearest_rows(data.rows(), data.row(i), k, Some(i))
                .iter()
                .filter(|n| data.label(n.index) != own)
                .count() as u32
        })
        .collect();
    Ok(KdnReport {
        k,
        disagreeing,
        labels: data.labels().to_vec(),
    })
}

/// KDN before and after a transformation such as SMOTE, with per-class mean
/// deltas (`after - before`). Synthetic rows in `after` count as ordinary
/// members of their class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessShift {
    pub before: KdnReport,
    pub after: KdnReport,
}

impl HardnessShift {
    pub fn mean_before(&self, label: Label) -> Option<f64> {
        self.before.class_mean(label)
    }

    pub fn mean_after(&self, label: Label) -> Option<f64> {
        self.after.class_mean(label)
    }

    pub fn delta(&self, label: Label) -> Option<f64> {
        Some(self.mean_after(label)? - self.mean_before(label)?)
    }
}

pub fn hardness_shift(before: &Dataset, after: &Dataset, k: usize) -> Result<HardnessShift> {
    Ok(HardnessShift {
        before: kdn_scores(before, k)?,
        after: kdn_scores(after, k)?,
    })
}
