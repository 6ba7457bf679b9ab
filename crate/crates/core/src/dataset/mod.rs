//! Sparse binary-label datasets: construction, splitting and class summaries.
//!
//! Rows are stored as sorted `(index, value)` pairs. Ingested malware feature
//! vectors are 0/1; rows produced by SMOTE carry fractional values.

mod csv_io;
mod drebin;
mod split;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_csv, write_csv};
pub use drebin::ingest_drebin;
pub use split::{round_half_up, stratified_split, SplitPair};

/// Binary class label. Positive is malware, the minority class in every
/// setting this crate was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Negative, Label::Positive];

    /// Position of this label in a `[negative, positive]` support vector.
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    #[inline]
    pub fn from_index(i: usize) -> Label {
        if i == 0 {
            Label::Negative
        } else {
            Label::Positive
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Negative => "negative",
            Label::Positive => "positive",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One sparse feature vector. Indices are strictly increasing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseRow {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRow {
    /// Builds a row from pairs that are already sorted by index. Explicit
    /// zeros are dropped.
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::Data(format!(
                "row has {} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data(
                "row indices must be strictly increasing".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite feature value {v}")));
        }
        let (indices, values) = indices
            .into_iter()
            .zip(values)
            .filter(|(_, v)| *v != 0.0)
            .unzip();
        Ok(SparseRow { indices, values })
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let mut row = SparseRow::default();
        for (i, &v) in values.iter().enumerate() {
            if v != 0.0 {
                row.indices.push(i as u32);
                row.values.push(v);
            }
        }
        row
    }

    /// A 0/1 row with ones at the given (sorted, unique) columns.
    pub fn binary(indices: Vec<u32>) -> Self {
        let values = vec![1.0; indices.len()];
        SparseRow { indices, values }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// Value at `column`, zero when not stored.
    pub fn get(&self, column: u32) -> f64 {
        match self.indices.binary_search(&column) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self, n_features: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_features];
        for (i, v) in self.iter() {
            if (i as usize) < n_features {
                out[i as usize] = v;
            }
        }
        out
    }

    /// Squared Euclidean distance, merging the two index lists.
    pub fn squared_distance(&self, other: &SparseRow) -> f64 {
        let (a_idx, a_val) = (&self.indices, &self.values);
        let (b_idx, b_val) = (&other.indices, &other.values);
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < a_idx.len() && j < b_idx.len() {
            match a_idx[i].cmp(&b_idx[j]) {
                std::cmp::Ordering::Less => {
                    acc += a_val[i] * a_val[i];
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    acc += b_val[j] * b_val[j];
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let d = a_val[i] - b_val[j];
                    acc += d * d;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc += a_val[i..].iter().map(|v| v * v).sum::<f64>();
        acc += b_val[j..].iter().map(|v| v * v).sum::<f64>();
        acc
    }

    pub fn distance(&self, other: &SparseRow) -> f64 {
        self.squared_distance(other).sqrt()
    }

    fn max_index(&self) -> Option<u32> {
        self.indices.last().copied()
    }
}

/// Per-class instance counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub negative: usize,
    pub positive: usize,
}

impl ClassCounts {
    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Negative => self.negative,
            Label::Positive => self.positive,
        }
    }

    pub fn total(&self) -> usize {
        self.negative + self.positive
    }

    /// The smaller class; `None` when the counts are equal.
    pub fn minority(&self) -> Option<Label> {
        match self.positive.cmp(&self.negative) {
            std::cmp::Ordering::Less => Some(Label::Positive),
            std::cmp::Ordering::Greater => Some(Label::Negative),
            std::cmp::Ordering::Equal => None,
        }
    }
}

/// Sparse feature matrix with binary labels and an optional vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<SparseRow>,
    labels: Vec<Label>,
    n_features: usize,
    vocabulary: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(rows: Vec<SparseRow>, labels: Vec<Label>, n_features: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some((r, max)) = rows
            .iter()
            .enumerate()
            .filter_map(|(r, row)| row.max_index().map(|m| (r, m)))
            .find(|(_, m)| *m as usize >= n_features)
        {
            return Err(Error::Data(format!(
                "row {r} references column {max} but the dataset has {n_features} features"
            )));
        }
        Ok(Dataset {
            rows,
            labels,
            n_features,
            vocabulary: None,
        })
    }

    pub fn empty(n_features: usize) -> Self {
        Dataset {
            rows: Vec::new(),
            labels: Vec::new(),
            n_features,
            vocabulary: None,
        }
    }

    /// Convenience constructor from dense rows.
    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<Label>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != n_features) {
            return Err(Error::Data(format!(
                "dense row {r} has {} columns, expected {n_features}",
                rows[r].len()
            )));
        }
        if let Some(v) = rows.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite feature value {v}")));
        }
        let rows = rows.iter().map(|r| SparseRow::from_dense(r)).collect();
        Dataset::new(rows, labels, n_features)
    }

    pub fn with_vocabulary(mut self, vocabulary: Vec<String>) -> Result<Self> {
        if vocabulary.len() != self.n_features {
            return Err(Error::Data(format!(
                "vocabulary has {} names for {} features",
                vocabulary.len(),
                self.n_features
            )));
        }
        let mut seen = HashSet::with_capacity(vocabulary.len());
        if let Some(dup) = vocabulary.iter().find(|name| !seen.insert(name.as_str())) {
            return Err(Error::Data(format!("duplicate feature name {dup:?}")));
        }
        self.vocabulary = Some(vocabulary);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &SparseRow {
        &self.rows[i]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn vocabulary(&self) -> Option<&[String]> {
        self.vocabulary.as_deref()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SparseRow, Label)> {
        self.rows.iter().zip(self.labels.iter().copied())
    }

    pub fn class_counts(&self) -> ClassCounts {
        let positive = self
            .labels
            .iter()
            .filter(|l| **l == Label::Positive)
            .count();
        ClassCounts {
            negative: self.labels.len() - positive,
            positive,
        }
    }

    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.labels[i] == label)
            .collect()
    }

    /// New dataset holding the given rows in the given order (repeats allowed).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_features: self.n_features,
            vocabulary: self.vocabulary.clone(),
        }
    }

    /// True when every stored value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.rows.iter().all(|r| r.values.iter().all(|&v| v == 1.0))
    }

    pub(crate) fn push(&mut self, row: SparseRow, label: Label) {
        debug_assert!(row
            .max_index()
            .is_none_or(|m| (m as usize) < self.n_features));
        self.rows.push(row);
        self.labels.push(label);
    }

    pub fn summarize(&self) -> DatasetSummary {
        let counts = self.class_counts();
        DatasetSummary::from_counts(counts.total(), counts.positive, self.n_features)
    }
}

/// Class totals and imbalance ratio of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub total: usize,
    pub positives: usize,
    pub negatives: usize,
    /// Majority count over minority count. Infinite when one class is absent.
    pub imbalance_ratio: f64,
    pub n_features: usize,
}

impl DatasetSummary {
    pub fn from_counts(total: usize, positives: usize, n_features: usize) -> Self {
        assert!(positives <= total, "positives exceed total");
        let negatives = total - positives;
        let (major, minor) = (negatives.max(positives), negatives.min(positives));
        let imbalance_ratio = if minor == 0 {
            f64::INFINITY
        } else {
            major as f64 / minor as f64
        };
        DatasetSummary {
            total,
            positives,
            negatives,
            imbalance_ratio,
            n_features,
        }
    }

    /// Imbalance ratio rendered with two decimals (`inf` when a class is absent).
    pub fn imbalance_ratio_display(&self) -> String {
        if self.imbalance_ratio.is_finite() {
            format!("{:.2}", self.imbalance_ratio)
        } else {
            "inf".to_string()
        }
    }
}

/// Free-function form of [`Dataset::summarize`]. Fails on an empty dataset.
pub fn summarize(data: &Dataset) -> Result<DatasetSummary> {
    if data.is_empty() {
        return Err(Error::Data("cannot summarize an empty dataset".into()));
    }
    Ok(data.summarize())
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "instances: {}\npositives: {}\nnegatives: {}\nfeatures: {}\nimbalance ratio: {}",
            self.total,
            self.positives,
            self.negatives,
            self.n_features,
            self.imbalance_ratio_display()
        )
    }
}
