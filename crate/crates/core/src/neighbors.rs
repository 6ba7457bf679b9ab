//! Brute-force k-nearest-neighbour search shared by kNN, SMOTE, KDN and the
//! dynamic selectors. Ties in distance always go to the lower index.

use crate::dataset::SparseRow;

/// A neighbour: candidate index and its squared distance to the query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub squared_distance: f64,
}

impl Neighbor {
    pub fn distance(&self) -> f64 {
        self.squared_distance.sqrt()
    }
}

fn order(a: &Neighbor, b: &Neighbor) -> std::cmp::Ordering {
    a.squared_distance
        .total_cmp(&b.squared_distance)
        .then(a.index.cmp(&b.index))
}

/// The `k` smallest of `candidates`, sorted by (distance, index).
pub fn k_smallest(mut candidates: Vec<Neighbor>, k: usize) -> Vec<Neighbor> {
    let k = k.min(candidates.len());
    if k == 0 {
        return Vec::new();
    }
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, order);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(order);
    candidates
}

/// Nearest rows of `pool` to `query`, optionally skipping one index.
pub fn nearest_rows(
    pool: &[SparseRow],
    query: &SparseRow,
    k: usize,
    exclude: Option<usize>,
) -> Vec<Neighbor> {
    let candidates = pool
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(index, row)| Neighbor {
            index,
            squared_distance: query.squared_distance(row),
        })
        .collect();
    k_smallest(candidates, k)
}

/// Nearest rows among a subset of `pool` given by `ids`. Returned indices are
/// positions into `ids`, and ties resolve by position.
pub fn nearest_in_subset(
    pool: &[SparseRow],
    ids: &[usize],
    query: &SparseRow,
    k: usize,
    exclude_position: Option<usize>,
) -> Vec<Neighbor> {
    let candidates = ids
        .iter()
        .enumerate()
        .filter(|(p, _)| Some(*p) != exclude_position)
        .map(|(index, &row)| Neighbor {
            index,
            squared_distance: query.squared_distance(&pool[row]),
        })
        .collect();
    k_smallest(candidates, k)
}

pub fn dense_squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest dense vectors to `query`, optionally skipping one index.
pub fn nearest_dense(
    pool: &[Vec<f64>],
    query: &[f64],
    k: usize,
    exclude: Option<usize>,
) -> Vec<Neighbor> {
    let candidates = pool
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(index, v)| Neighbor {
            index,
            squared_distance: dense_squared_distance(query, v),
        })
        .collect();
    k_smallest(candidates, k)
}
