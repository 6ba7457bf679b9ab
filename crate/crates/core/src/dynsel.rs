//! Dynamic selection over a trained pool. Competence is estimated per query
//! on a held-out labelled set (DSEL):
//!
//! * OLA picks the single member most accurate on the query's `k` nearest
//!   DSEL rows.
//! * KNOP finds the `k` DSEL rows whose output profiles (all members' class
//!   supports, concatenated) are closest to the query's profile, and lets
//!   members vote with weight equal to how many of those rows they got right.
//! * META-DES trains a meta-classifier on competence meta-features and keeps
//!   the members it judges competent for the query.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{train_bernoulli_nb, BernoulliNb, Classifier, Support};
use crate::dataset::{stratified_split, Dataset, Label, SparseRow};
use crate::error::{Error, Result};
use crate::neighbors::{nearest_dense, nearest_rows, Neighbor};
use crate::pool::{argmax_first, majority_vote, weighted_vote, ClassifierPool};

/// Training rows split into the part used to build the pool and the DSEL
/// hold-out. Indices refer to the original training set.
#[derive(Debug, Clone, PartialEq)]
pub struct DselSplit {
    pub pool_train: Dataset,
    pub dsel: Dataset,
    pub pool_train_indices: Vec<usize>,
    pub dsel_indices: Vec<usize>,
}

/// Stratified carve-out of `fraction` of `train` for DSEL. Must happen
/// before the pool is built so DSEL rows never reach a bootstrap.
pub fn split_dsel(train: &Dataset, fraction: f64, seed: u64, min_rows: usize) -> Result<DselSplit> {
    let counts = train.class_counts();
    if counts.negative < 2 || counts.positive < 2 {
        return Err(Error::Config(
            "carving out DSEL needs at least two instances of each class".into(),
        ));
    }
    let split = stratified_split(train, fraction, seed)?;
    if split.test.len() < min_rows {
        return Err(Error::Config(format!(
            "DSEL fraction {fraction} leaves {} rows, fewer than the {min_rows} needed",
            split.test.len()
        )));
    }
    Ok(DselSplit {
        pool_train: split.train,
        dsel: split.test,
        pool_train_indices: split.train_indices,
        dsel_indices: split.test_indices,
    })
}

/// Concatenated class supports of every member for one instance.
pub fn output_profile(pool: &ClassifierPool, x: &SparseRow) -> Vec<f64> {
    pool.members().iter().flat_map(|m| m.support(x)).collect()
}

/// DSEL rows with every member's predictions and supports precomputed.
#[derive(Debug, Clone)]
pub struct Dsel {
    data: Dataset,
    /// `[row][member]`
    supports: Vec<Vec<Support>>,
    predictions: Vec<Vec<Label>>,
    profiles: Vec<Vec<f64>>,
}

impl Dsel {
    pub fn new(data: Dataset, pool: &ClassifierPool) -> Result<Dsel> {
        if data.is_empty() {
            return Err(Error::Config("DSEL is empty".into()));
        }
        let by_member: Vec<Vec<Support>> = pool
            .members()
            .par_iter()
            .map(|m| data.rows().iter().map(|x| m.support(x)).collect())
            .collect();
        let supports: Vec<Vec<Support>> = (0..data.len())
            .map(|r| by_member.iter().map(|col| col[r]).collect())
            .collect();
        let predictions = supports
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| crate::classifiers::label_from_support(*s))
                    .collect()
            })
            .collect();
        let profiles = supports
            .iter()
            .map(|row| row.iter().flatten().copied().collect())
            .collect();
        Ok(Dsel {
            data,
            supports,
            predictions,
            profiles,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn n_members(&self) -> usize {
        self.predictions[0].len()
    }

    pub fn prediction(&self, row: usize, member: usize) -> Label {
        self.predictions[row][member]
    }

    pub fn support(&self, row: usize, member: usize) -> Support {
        self.supports[row][member]
    }

    pub fn profile(&self, row: usize) -> &[f64] {
        &self.profiles[row]
    }

    pub fn correct(&self, row: usize, member: usize) -> bool {
        self.predictions[row][member] == self.data.label(row)
    }

    fn check_pool(&self, pool: &ClassifierPool) {
        assert_eq!(
            pool.len(),
            self.n_members(),
            "DSEL was precomputed for a different pool"
        );
    }
}

/// The `k` nearest DSEL rows to a query, by non-decreasing distance.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionOfCompetence {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl From<Vec<Neighbor>> for RegionOfCompetence {
    fn from(n: Vec<Neighbor>) -> Self {
        RegionOfCompetence {
            indices: n.iter().map(|n| n.index).collect(),
            distances: n.iter().map(Neighbor::distance).collect(),
        }
    }
}

pub fn region_of_competence(dsel: &Dsel, xq: &SparseRow, k: usize) -> RegionOfCompetence {
    nearest_rows(dsel.data.rows(), xq, k, None).into()
}

/// Per-member count of correctly classified rows in `region`.
pub fn local_correct_counts(dsel: &Dsel, region: &[usize]) -> Vec<usize> {
    (0..dsel.n_members())
        .map(|m| region.iter().filter(|&&r| dsel.correct(r, m)).count())
        .collect()
}

/// Overall Local Accuracy: the member most accurate in the region of
/// competence classifies the query alone. Ties go to the lower member index.
pub fn ola_select(pool: &ClassifierPool, dsel: &Dsel, xq: &SparseRow, k: usize) -> Label {
    pool.member(ola_choice(pool, dsel, xq, k)).predict(xq)
}

/// Index of the member OLA would use for `xq`.
pub fn ola_choice(pool: &ClassifierPool, dsel: &Dsel, xq: &SparseRow, k: usize) -> usize {
    dsel.check_pool(pool);
    let region = region_of_competence(dsel, xq, k);
    let counts: Vec<f64> = local_correct_counts(dsel, &region.indices)
        .into_iter()
        .map(|c| c as f64)
        .collect();
    argmax_first(&counts)
}

/// KNOP weights: for each member, how many of the `k` profile-space
/// neighbours of `xq` it classifies correctly.
pub fn knop_weights(pool: &ClassifierPool, dsel: &Dsel, xq: &SparseRow, k: usize) -> Vec<usize> {
    dsel.check_pool(pool);
    let profile = output_profile(pool, xq);
    let neighbors: Vec<usize> = nearest_dense(&dsel.profiles, &profile, k, None)
        .iter()
        .map(|n| n.index)
        .collect();
    local_correct_counts(dsel, &neighbors)
}

/// K-Nearest Output Profiles. Falls back to a plain majority vote of the
/// whole pool when no member gets any profile neighbour right.
pub fn knop_select(pool: &ClassifierPool, dsel: &Dsel, xq: &SparseRow, k: usize) -> Label {
    let weights = knop_weights(pool, dsel, xq, k);
    if weights.iter().all(|&w| w == 0) {
        return majority_vote(pool, xq, None);
    }
    let w: Vec<f64> = weights.iter().map(|&w| w as f64).collect();
    majority_vote(pool, xq, Some(&w))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaDesConfig {
    /// Region of competence size in feature space.
    pub k: usize,
    /// Neighbourhood size in output-profile space.
    pub kp: usize,
    /// DSEL rows whose pool consensus falls below this become meta-training rows.
    pub consensus_threshold: f64,
    /// Minimum meta-classifier competence for a member to be selected.
    pub selection_threshold: f64,
}

impl Default for MetaDesConfig {
    fn default() -> Self {
        MetaDesConfig {
            k: 7,
            kp: 5,
            consensus_threshold: 0.7,
            selection_threshold: 0.5,
        }
    }
}

/// Length of a META-DES meta-feature vector: `2K + Kp + 2`.
pub fn meta_feature_len(k: usize, kp: usize) -> usize {
    2 * k + kp + 2
}

/// Meta-features describing how competent `member` looks around one
/// instance:
///
/// * f1: correctness on each of the K feature-space neighbours
/// * f2: support given to each neighbour's true class
/// * f3: local accuracy (mean of f1)
/// * f4: correctness on each of the Kp output-profile neighbours
/// * f5: confidence on the instance itself (support of its predicted class)
pub fn meta_features(
    dsel: &Dsel,
    member: usize,
    feature_neighbors: &[usize],
    profile_neighbors: &[usize],
    own_support: Support,
) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * feature_neighbors.len() + profile_neighbors.len() + 2);
    let f1: Vec<f64> = feature_neighbors
        .iter()
        .map(|&r| dsel.correct(r, member) as u8 as f64)
        .collect();
    let local_accuracy = f1.iter().sum::<f64>() / f1.len().max(1) as f64;
    v.extend_from_slice(&f1);
    v.extend(
        feature_neighbors
            .iter()
            .map(|&r| dsel.support(r, member)[dsel.data.label(r).index()]),
    );
    v.push(local_accuracy);
    v.extend(
        profile_neighbors
            .iter()
            .map(|&r| dsel.correct(r, member) as u8 as f64),
    );
    v.push(own_support[0].max(own_support[1]));
    v
}

/// Fitted META-DES selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaClassifier {
    nb: BernoulliNb,
    pub k: usize,
    pub kp: usize,
    /// Consensus cut actually used after any relaxation.
    pub consensus_threshold: f64,
    pub meta_rows: usize,
}

impl MetaClassifier {
    /// Estimated probability that a member with these meta-features is
    /// competent.
    pub fn competence(&self, meta_features: &[f64]) -> f64 {
        self.nb.support(&SparseRow::from_dense(meta_features))[1]
    }
}

/// Meta-training set: one vector per (selected DSEL row, member) with label
/// "member classified the row correctly". Returned alongside the row
/// consensus values.
pub struct MetaTrainingSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub threshold: f64,
}

fn consensus(row: &[Label]) -> f64 {
    let pos = row.iter().filter(|l| **l == Label::Positive).count();
    pos.max(row.len() - pos) as f64 / row.len() as f64
}

/// Builds META-DES meta-training data. Rows with pool consensus below the
/// threshold are used; when that leaves fewer than two examples of either
/// meta-label the cut is relaxed by 0.1 until every row is admitted.
pub fn metades_training_set(dsel: &Dsel, cfg: &MetaDesConfig) -> Result<MetaTrainingSet> {
    if cfg.k == 0 || cfg.kp == 0 {
        return Err(Error::Config("META-DES needs K >= 1 and Kp >= 1".into()));
    }
    let n_rows = dsel.len();
    if n_rows <= cfg.k.max(cfg.kp) {
        return Err(Error::Config(format!(
            "META-DES needs more than {} DSEL rows, got {n_rows}",
            cfg.k.max(cfg.kp)
        )));
    }
    let n_members = dsel.n_members();
    let consensus: Vec<f64> = dsel.predictions.iter().map(|r| consensus(r)).collect();

    // Neighbourhoods of each DSEL row, excluding the row itself.
    let neighborhoods: Vec<(Vec<usize>, Vec<usize>)> = (0..n_rows)
        .into_par_iter()
        .map(|r| {
            let feat = nearest_rows(dsel.data.rows(), dsel.data.row(r), cfg.k, Some(r));
            let prof = nearest_dense(&dsel.profiles, &dsel.profiles[r], cfg.kp, Some(r));
            (
                feat.iter().map(|n| n.index).collect(),
                prof.iter().map(|n| n.index).collect(),
            )
        })
        .collect();

    let mut step = 0u32;
    loop {
        // rounded so that 0.7 + 3 * 0.1 lands on 1.0 rather than just above it
        let threshold = ((cfg.consensus_threshold + 0.1 * step as f64) * 1e9).round() / 1e9;
        let admit_all = threshold > 1.0;
        let rows: Vec<usize> = (0..n_rows)
            .filter(|&r| admit_all || consensus[r] < threshold)
            .collect();
        let mut counts = [0usize; 2];
        for &r in &rows {
            for m in 0..n_members {
                counts[dsel.correct(r, m) as usize] += 1;
            }
        }
        if counts[0] >= 2 && counts[1] >= 2 {
            let mut features = Vec::with_capacity(rows.len() * n_members);
            let mut labels = Vec::with_capacity(rows.len() * n_members);
            for &r in &rows {
                let (feat, prof) = &neighborhoods[r];
                for m in 0..n_members {
                    features.push(meta_features(dsel, m, feat, prof, dsel.support(r, m)));
                    labels.push(if dsel.correct(r, m) {
                        Label::Positive
                    } else {
                        Label::Negative
                    });
                }
            }
            return Ok(MetaTrainingSet {
                features,
                labels,
                threshold,
            });
        }
        if admit_all {
            return Err(Error::Data(
                "META-DES meta-training data has fewer than two examples of a meta-label \
                 even with every DSEL row admitted"
                    .into(),
            ));
        }
        step += 1;
    }
}

/// Trains the META-DES meta-classifier (Bernoulli naive Bayes over
/// meta-features binarized at 0.5).
pub fn metades_train(
    pool: &ClassifierPool,
    dsel: &Dsel,
    cfg: &MetaDesConfig,
) -> Result<MetaClassifier> {
    dsel.check_pool(pool);
    let set = metades_training_set(dsel, cfg)?;
    let meta_rows = set.labels.len();
    let data = Dataset::from_dense(&set.features, set.labels)?;
    Ok(MetaClassifier {
        nb: train_bernoulli_nb(&data, 1.0)?,
        k: cfg.k,
        kp: cfg.kp,
        consensus_threshold: set.threshold,
        meta_rows,
    })
}

/// Per-member META-DES competence estimates at `xq`.
pub fn metades_competences(
    meta: &MetaClassifier,
    pool: &ClassifierPool,
    dsel: &Dsel,
    xq: &SparseRow,
) -> Vec<f64> {
    dsel.check_pool(pool);
    let feat: Vec<usize> = nearest_rows(dsel.data.rows(), xq, meta.k, None)
        .iter()
        .map(|n| n.index)
        .collect();
    let profile = output_profile(pool, xq);
    let prof: Vec<usize> = nearest_dense(&dsel.profiles, &profile, meta.kp, None)
        .iter()
        .map(|n| n.index)
        .collect();
    (0..pool.len())
        .map(|m| {
            let own = [profile[2 * m], profile[2 * m + 1]];
            meta.competence(&meta_features(dsel, m, &feat, &prof, own))
        })
        .collect()
}

/// Members whose estimated competence reaches `threshold` vote unweighted;
/// when none does, the whole pool votes.
pub fn metades_select(
    meta: &MetaClassifier,
    pool: &ClassifierPool,
    dsel: &Dsel,
    xq: &SparseRow,
    threshold: f64,
) -> Label {
    let competences = metades_competences(meta, pool, dsel, xq);
    let selected: Vec<usize> = (0..pool.len())
        .filter(|&m| competences[m] >= threshold)
        .collect();
    if selected.is_empty() {
        return majority_vote(pool, xq, None);
    }
    weighted_vote(selected.iter().map(|&m| (pool.member(m).predict(xq), 1.0)))
}

/// Which dynamic selector to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorKind {
    Ola,
    Knop,
    MetaDes,
}

/// A pool, its DSEL, and a fitted selector, usable as one classifier.
pub struct DynamicEnsemble {
    pool: ClassifierPool,
    dsel: Dsel,
    method: Method,
}

enum Method {
    Ola {
        k: usize,
    },
    Knop {
        k: usize,
    },
    MetaDes {
        meta: MetaClassifier,
        threshold: f64,
    },
}

impl DynamicEnsemble {
    pub fn new(
        pool: ClassifierPool,
        dsel: Dsel,
        kind: SelectorKind,
        k: usize,
        metades: &MetaDesConfig,
    ) -> Result<Self> {
        let method = match kind {
            SelectorKind::Ola => Method::Ola { k },
            SelectorKind::Knop => Method::Knop { k },
            SelectorKind::MetaDes => Method::MetaDes {
                meta: metades_train(&pool, &dsel, metades)?,
                threshold: metades.selection_threshold,
            },
        };
        Ok(DynamicEnsemble { pool, dsel, method })
    }

    pub fn pool(&self) -> &ClassifierPool {
        &self.pool
    }

    pub fn dsel(&self) -> &Dsel {
        &self.dsel
    }

    pub fn predict(&self, xq: &SparseRow) -> Label {
        match &self.method {
            Method::Ola { k } => ola_select(&self.pool, &self.dsel, xq, *k),
            Method::Knop { k } => knop_select(&self.pool, &self.dsel, xq, *k),
            Method::MetaDes { meta, threshold } => {
                metades_select(meta, &self.pool, &self.dsel, xq, *threshold)
            }
        }
    }

    pub fn predict_all(&self, data: &Dataset) -> Vec<Label> {
        data.rows().par_iter().map(|x| self.predict(x)).collect()
    }
}
