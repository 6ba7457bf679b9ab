use serde::{Deserialize, Serialize};

use super::{Classifier, Support};
use crate::dataset::{Dataset, Label, SparseRow};
use crate::error::{Error, Result};
use crate::neighbors::nearest_rows;

/// Lazy k-nearest-neighbour classifier (Euclidean). Distance ties go to the
/// lower training row; a split vote goes to the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    k: usize,
    data: Dataset,
}

impl Knn {
    pub fn k(&self) -> usize {
        self.k
    }
}

pub fn train_knn(data: &Dataset, k: usize) -> Result<Knn> {
    if data.is_empty() {
        return Err(Error::Data("cannot train kNN on an empty dataset".into()));
    }
    if k == 0 {
        return Err(Error::Config("kNN needs k >= 1".into()));
    }
    Ok(Knn {
        k,
        data: data.clone(),
    })
}

impl Classifier for Knn {
    fn support(&self, x: &SparseRow) -> Support {
        let neighbors = nearest_rows(self.data.rows(), x, self.k, None);
        let pos = neighbors
            .iter()
            .filter(|n| self.data.label(n.index) == Label::Positive)
            .count() as f64;
        let total = neighbors.len() as f64;
        [(total - pos) / total, pos / total]
    }
}
