//! Classifier pools and their static combiners.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balancing::{bbb_generate, bootstrap, whole_set_balance, SmoteConfig};
use crate::classifiers::{
    train_bernoulli_nb, train_decision_tree, train_knn, Classifier, FeatureSubsample, Model,
    TreeParams,
};
use crate::dataset::{Dataset, Label, SparseRow};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, confusion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    Tree,
    Knn,
    NaiveBayes,
}

impl BaseKind {
    pub fn name(self) -> &'static str {
        match self {
            BaseKind::Tree => "tree",
            BaseKind::Knn => "knn",
            BaseKind::NaiveBayes => "nb",
        }
    }
}

impl FromStr for BaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" | "dt" | "decision_tree" => Ok(BaseKind::Tree),
            "knn" => Ok(BaseKind::Knn),
            "nb" | "naive_bayes" => Ok(BaseKind::NaiveBayes),
            other => Err(Error::Config(format!("unknown base learner {other:?}"))),
        }
    }
}

/// How training data is balanced before pool members see it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    None,
    /// SMOTE on every bootstrap separately.
    Bbb,
    /// SMOTE once on the training set, then plain bootstraps.
    WholeSet,
}

impl BalanceMode {
    pub fn name(self) -> &'static str {
        match self {
            BalanceMode::None => "none",
            BalanceMode::Bbb => "bbb",
            BalanceMode::WholeSet => "whole_set",
        }
    }
}

impl fmt::Display for BalanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BalanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(BalanceMode::None),
            "bbb" => Ok(BalanceMode::Bbb),
            "whole_set" | "whole-set" => Ok(BalanceMode::WholeSet),
            other => Err(Error::Config(format!("unknown balance mode {other:?}"))),
        }
    }
}

/// Hyperparameters of the base learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub knn_k: usize,
    pub nb_alpha: f64,
}

impl Default for BaseParams {
    fn default() -> Self {
        BaseParams {
            max_depth: None,
            min_samples_split: 2,
            knn_k: 5,
            nb_alpha: 1.0,
        }
    }
}

/// Trains one base learner. `seed` only matters in random-forest mode.
pub fn train_base(
    kind: BaseKind,
    data: &Dataset,
    params: &BaseParams,
    feature_subsample: Option<FeatureSubsample>,
    seed: u64,
) -> Result<Model> {
    Ok(match kind {
        BaseKind::Tree => train_decision_tree(
            data,
            &TreeParams {
                max_depth: params.max_depth,
                min_samples_split: params.min_samples_split,
                feature_subsample,
                seed,
            },
        )?
        .into(),
        BaseKind::Knn => train_knn(data, params.knn_k)?.into(),
        BaseKind::NaiveBayes => train_bernoulli_nb(data, params.nb_alpha)?.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub base_kind: BaseKind,
    pub n: usize,
    pub balance: BalanceMode,
    pub smote: SmoteConfig,
    pub seed: u64,
    /// Random-forest mode for tree pools.
    pub rf_feature_subsample: Option<FeatureSubsample>,
    pub base: BaseParams,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            base_kind: BaseKind::Tree,
            n: 100,
            balance: BalanceMode::None,
            smote: SmoteConfig::default(),
            seed: 0,
            rf_feature_subsample: None,
            base: BaseParams::default(),
        }
    }
}

/// Where a pool member's training data came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub bootstrap_seed: u64,
    pub balanced: bool,
    /// Bootstrap draws needed to obtain both classes.
    pub attempts: u64,
}

/// A trained pool `P = {c1..cn}` with per-member provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierPool {
    members: Vec<Model>,
    provenance: Vec<Provenance>,
    base_kind: BaseKind,
    balance: BalanceMode,
}

impl ClassifierPool {
    pub fn new(
        members: Vec<Model>,
        provenance: Vec<Provenance>,
        base_kind: BaseKind,
        balance: BalanceMode,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("a pool needs at least one member".into()));
        }
        if members.len() != provenance.len() {
            return Err(Error::Data(format!(
                "{} members but {} provenance records",
                members.len(),
                provenance.len()
            )));
        }
        Ok(ClassifierPool {
            members,
            provenance,
            base_kind,
            balance,
        })
    }

    /// Pool of pre-trained members with blank provenance.
    pub fn from_members(members: Vec<Model>, base_kind: BaseKind) -> Result<Self> {
        let provenance = vec![
            Provenance {
                bootstrap_seed: 0,
                balanced: false,
                attempts: 0,
            };
            members.len()
        ];
        ClassifierPool::new(members, provenance, base_kind, BalanceMode::None)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Model] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &Model {
        &self.members[i]
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn base_kind(&self) -> BaseKind {
        self.base_kind
    }

    pub fn balance(&self) -> BalanceMode {
        self.balance
    }

    /// Every member's predictions on `data`, member-major.
    pub fn member_predictions(&self, data: &Dataset) -> Vec<Vec<Label>> {
        self.members
            .par_iter()
            .map(|m| m.predict_all(data))
            .collect()
    }

    /// Keeps the listed members, in the given order.
    pub fn select(&self, keep: &[usize]) -> ClassifierPool {
        ClassifierPool {
            members: keep.iter().map(|&i| self.members[i].clone()).collect(),
            provenance: keep.iter().map(|&i| self.provenance[i]).collect(),
            base_kind: self.base_kind,
            balance: self.balance,
        }
    }
}

impl Classifier for ClassifierPool {
    /// Fraction of member votes per class.
    fn support(&self, x: &SparseRow) -> [f64; 2] {
        let pos = self
            .members
            .iter()
            .filter(|m| m.predict(x) == Label::Positive)
            .count() as f64;
        let n = self.members.len() as f64;
        [(n - pos) / n, pos / n]
    }

    fn predict(&self, x: &SparseRow) -> Label {
        majority_vote(self, x, None)
    }
}

/// Trains `n` members on bootstraps of `train`, balanced per `config.balance`.
/// `train` itself is never modified.
pub fn build_pool(train: &Dataset, config: &PoolConfig) -> Result<ClassifierPool> {
    if config.n == 0 {
        return Err(Error::Config("pool size must be at least 1".into()));
    }
    let counts = train.class_counts();
    if counts.negative == 0 || counts.positive == 0 {
        return Err(Error::Config("pool training needs both classes".into()));
    }
    let n = config.n;
    let subsample = match config.base_kind {
        BaseKind::Tree => config.rf_feature_subsample,
        _ => None,
    };
    let train_one = |data: &Dataset, seed: u64| {
        train_base(config.base_kind, data, &config.base, subsample, seed)
    };

    let trained: Vec<(Model, Provenance)> = match config.balance {
        BalanceMode::Bbb => bbb_generate(train, n, &config.smote, config.seed)?
            .into_par_iter()
            .map(|s| {
                let view = s.balanced_view.as_ref().expect("BBB samples carry a view");
                let model = train_one(view, s.seed)?;
                Ok((
                    model,
                    Provenance {
                        bootstrap_seed: s.seed,
                        balanced: true,
                        attempts: s.attempts,
                    },
                ))
            })
            .collect::<Result<_>>()?,
        BalanceMode::WholeSet | BalanceMode::None => {
            let balanced;
            let source = if config.balance == BalanceMode::WholeSet {
                let cfg = SmoteConfig {
                    seed: config.smote.seed.wrapping_add(config.seed),
                    ..config.smote
                };
                balanced = whole_set_balance(train, &cfg)?;
                &balanced
            } else {
                train
            };
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let s = bootstrap(source, config.seed.wrapping_add(i as u64))?;
                    let model = train_one(&s.materialize(source), s.seed)?;
                    Ok((
                        model,
                        Provenance {
                            bootstrap_seed: s.seed,
                            balanced: config.balance == BalanceMode::WholeSet,
                            attempts: 1,
                        },
                    ))
                })
                .collect::<Result<_>>()?
        }
    };
    let (members, provenance) = trained.into_iter().unzip();
    ClassifierPool::new(members, provenance, config.base_kind, config.balance)
}

/// Weighted plurality of labels. A tie (including all-zero weight) goes to the
/// positive class.
pub fn weighted_vote(votes: impl IntoIterator<Item = (Label, f64)>) -> Label {
    let mut tally = [0.0; 2];
    for (label, w) in votes {
        tally[label.index()] += w;
    }
    if tally[1] >= tally[0] {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// Weighted plurality of member predictions on `x`; unweighted when `weights`
/// is `None`.
pub fn majority_vote(pool: &ClassifierPool, x: &SparseRow, weights: Option<&[f64]>) -> Label {
    if let Some(w) = weights {
        assert_eq!(w.len(), pool.len(), "one weight per member");
    }
    weighted_vote(
        pool.members
            .iter()
            .enumerate()
            .map(|(i, m)| (m.predict(x), weights.map_or(1.0, |w| w[i]))),
    )
}

/// Score used to rank members on validation data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMetric {
    #[default]
    Accuracy,
    GMean,
}

fn score(pred: &[Label], truth: &[Label], metric: RankingMetric) -> f64 {
    match metric {
        RankingMetric::Accuracy => {
            pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
        }
        RankingMetric::GMean => compute_metrics(&confusion(pred, truth)).g_mean,
    }
}

/// Validation score of every member.
pub fn member_scores(
    pool: &ClassifierPool,
    validation: &Dataset,
    metric: RankingMetric,
) -> Result<Vec<f64>> {
    if validation.is_empty() {
        return Err(Error::Config("validation set is empty".into()));
    }
    Ok(pool
        .member_predictions(validation)
        .iter()
        .map(|p| score(p, validation.labels(), metric))
        .collect())
}

/// Index of the best member on `validation`; ties go to the lowest index.
pub fn single_best(
    pool: &ClassifierPool,
    validation: &Dataset,
    metric: RankingMetric,
) -> Result<usize> {
    let scores = member_scores(pool, validation, metric)?;
    Ok(argmax_first(&scores))
}

pub(crate) fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Number of members kept by static selection: `ceil(keep_fraction * n)`.
pub fn retained_count(keep_fraction: f64, n: usize) -> usize {
    // Round away float noise like 0.7 * 10 = 7.000000000000001 before ceil.
    let raw = keep_fraction * n as f64;
    let cleaned = (raw * 1e9).round() / 1e9;
    (cleaned.ceil() as usize).clamp(1, n)
}

/// Keeps the `ceil(keep_fraction * n)` best members on `validation` (ties to
/// the lower index). Returns the sub-pool, in original member order, and the
/// retained indices.
pub fn static_selection(
    pool: &ClassifierPool,
    validation: &Dataset,
    keep_fraction: f64,
    metric: RankingMetric,
) -> Result<(ClassifierPool, Vec<usize>)> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "keep fraction must lie in (0, 1], got {keep_fraction}"
        )));
    }
    let scores = member_scores(pool, validation, metric)?;
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut keep = order[..retained_count(keep_fraction, pool.len())].to_vec();
    keep.sort_unstable();
    Ok((pool.select(&keep), keep))
}
