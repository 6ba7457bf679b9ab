use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::balancing::SmoteConfig;
use crate::classifiers::FeatureSubsample;
use crate::dataset::{ingest_drebin, load_csv, Dataset};
use crate::dynsel::MetaDesConfig;
use crate::error::{Error, Result};
use crate::pool::{BalanceMode, BaseKind, BaseParams, RankingMetric};
use crate::synthetic::{gaussian_blobs, BlobConfig};

/// Where the experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
    },
    Drebin {
        feature_dir: PathBuf,
        manifest: PathBuf,
        #[serde(default = "default_min_feature_count")]
        min_feature_count: usize,
    },
    Synthetic(BlobConfig),
}

fn default_min_feature_count() -> usize {
    10
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Csv { path } => load_csv(path),
            DatasetSource::Drebin {
                feature_dir,
                manifest,
                min_feature_count,
            } => ingest_drebin(feature_dir, manifest, *min_feature_count),
            DatasetSource::Synthetic(cfg) => gaussian_blobs(cfg),
        }
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            DatasetSource::Csv { path } => fix(path),
            DatasetSource::Drebin {
                feature_dir,
                manifest,
                ..
            } => {
                fix(feature_dir);
                fix(manifest);
            }
            DatasetSource::Synthetic(_) => {}
        }
    }
}

/// A model arm of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelId {
    DecisionTree,
    Knn,
    NaiveBayes,
    Bagging(BaseKind),
    RandomForest,
    SingleBest,
    StaticSelection,
    Knop,
    MetaDes,
    Ola,
}

impl ModelId {
    /// Single learners, balanced (if at all) on the whole training set.
    pub fn is_monolithic(self) -> bool {
        matches!(
            self,
            ModelId::DecisionTree | ModelId::Knn | ModelId::NaiveBayes
        )
    }

    /// Models that need a DSEL hold-out.
    pub fn uses_dsel(self) -> bool {
        matches!(
            self,
            ModelId::SingleBest
                | ModelId::StaticSelection
                | ModelId::Knop
                | ModelId::MetaDes
                | ModelId::Ola
        )
    }

    pub fn is_dynamic(self) -> bool {
        matches!(self, ModelId::Knop | ModelId::MetaDes | ModelId::Ola)
    }

    pub fn name(self) -> String {
        match self {
            ModelId::DecisionTree => "decision_tree".into(),
            ModelId::Knn => "knn".into(),
            ModelId::NaiveBayes => "nb".into(),
            ModelId::Bagging(b) => format!("bagging_{}", b.name()),
            ModelId::RandomForest => "random_forest".into(),
            ModelId::SingleBest => "single_best".into(),
            ModelId::StaticSelection => "static_selection".into(),
            ModelId::Knop => "knop".into(),
            ModelId::MetaDes => "metades".into(),
            ModelId::Ola => "ola".into(),
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "decision_tree" | "dt" => ModelId::DecisionTree,
            "knn" => ModelId::Knn,
            "nb" | "naive_bayes" => ModelId::NaiveBayes,
            "random_forest" | "rf" => ModelId::RandomForest,
            "single_best" => ModelId::SingleBest,
            "static_selection" => ModelId::StaticSelection,
            "knop" => ModelId::Knop,
            "metades" | "meta_des" => ModelId::MetaDes,
            "ola" => ModelId::Ola,
            other => match other.strip_prefix("bagging_") {
                Some(base) => ModelId::Bagging(base.parse()?),
                None => return Err(Error::Config(format!("unknown model {other:?}"))),
            },
        })
    }
}

impl Serialize for ModelId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for ModelId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Pool used by the static and dynamic selectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPool {
    /// Trees with per-node feature subsampling.
    RandomForest,
    BaggedTrees,
    BaggedKnn,
    BaggedNb,
}

impl SelectionPool {
    pub fn base_kind(self) -> BaseKind {
        match self {
            SelectionPool::RandomForest | SelectionPool::BaggedTrees => BaseKind::Tree,
            SelectionPool::BaggedKnn => BaseKind::Knn,
            SelectionPool::BaggedNb => BaseKind::NaiveBayes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum DselPolicy {
    /// Stratified hold-out of this fraction of the training split.
    HoldOut { fraction: f64 },
    /// Estimate competence on the full training split.
    Reuse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardnessData {
    Train,
    Test,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HardnessConfig {
    pub k: usize,
    pub data: HardnessData,
}

impl Default for HardnessConfig {
    fn default() -> Self {
        HardnessConfig {
            k: 5,
            data: HardnessData::Train,
        }
    }
}

/// Everything an experiment run depends on. Seeds for iteration `i` derive
/// from `seed + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub models: Vec<ModelId>,
    pub balance: Vec<BalanceMode>,
    pub iterations: usize,
    pub test_fraction: f64,
    pub pool_size: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub selection_pool: SelectionPool,
    pub rf_feature_subsample: FeatureSubsample,
    pub base: BaseParams,
    pub smote: SmoteConfig,
    pub dsel: DselPolicy,
    /// Region of competence size for OLA and KNOP.
    pub ds_k: usize,
    pub metades: MetaDesConfig,
    pub static_keep_fraction: f64,
    pub ranking_metric: RankingMetric,
    pub hardness: HardnessConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Synthetic(BlobConfig::default()),
            models: vec![
                ModelId::DecisionTree,
                ModelId::Knn,
                ModelId::NaiveBayes,
                ModelId::Bagging(BaseKind::Tree),
                ModelId::Bagging(BaseKind::Knn),
                ModelId::Bagging(BaseKind::NaiveBayes),
                ModelId::RandomForest,
                ModelId::SingleBest,
                ModelId::StaticSelection,
                ModelId::Knop,
                ModelId::MetaDes,
                ModelId::Ola,
            ],
            balance: vec![BalanceMode::None, BalanceMode::WholeSet, BalanceMode::Bbb],
            iterations: 30,
            test_fraction: 0.2,
            pool_size: 100,
            seed: 0,
            output_dir: PathBuf::from("results"),
            selection_pool: SelectionPool::RandomForest,
            rf_feature_subsample: FeatureSubsample::Sqrt,
            base: BaseParams::default(),
            smote: SmoteConfig::default(),
            dsel: DselPolicy::HoldOut { fraction: 0.25 },
            ds_k: 7,
            metades: MetaDesConfig::default(),
            static_keep_fraction: 0.5,
            ranking_metric: RankingMetric::Accuracy,
            hardness: HardnessConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config. Relative data paths resolve against the config
    /// file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            cfg.dataset.resolve_relative(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.iterations == 0 {
            return fail("iterations must be at least 1".into());
        }
        if self.models.is_empty() {
            return fail("no models configured".into());
        }
        if self.balance.is_empty() {
            return fail("no balance modes configured".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return fail(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            ));
        }
        if self.pool_size == 0 {
            return fail("pool_size must be at least 1".into());
        }
        if let DselPolicy::HoldOut { fraction } = self.dsel {
            if !(fraction > 0.0 && fraction < 1.0) {
                return fail(format!("dsel fraction must lie in (0, 1), got {fraction}"));
            }
        }
        if self.ds_k == 0 {
            return fail("ds_k must be at least 1".into());
        }
        if !(self.static_keep_fraction > 0.0 && self.static_keep_fraction <= 1.0) {
            return fail(format!(
                "static_keep_fraction must lie in (0, 1], got {}",
                self.static_keep_fraction
            ));
        }
        if self.smote.k_neighbors == 0 {
            return fail("smote.k_neighbors must be at least 1".into());
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].contains(m) {
                return fail(format!("model {m} listed twice"));
            }
        }
        for (i, b) in self.balance.iter().enumerate() {
            if self.balance[..i].contains(b) {
                return fail(format!("balance mode {b} listed twice"));
            }
        }
        Ok(())
    }

    /// The (model, balance) arms run per iteration, in report order. A single
    /// learner has no bootstraps to balance, so `bbb` arms are skipped for
    /// monolithic models.
    pub fn arms(&self) -> Vec<(ModelId, BalanceMode)> {
        let mut arms = Vec::new();
        for &m in &self.models {
            for &b in &self.balance {
                if m.is_monolithic() && b == BalanceMode::Bbb {
                    continue;
                }
                arms.push((m, b));
            }
        }
        arms
    }

    pub fn iteration_seed(&self, iteration: usize) -> u64 {
        self.seed.wrapping_add(iteration as u64)
    }
}
