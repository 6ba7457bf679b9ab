use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balancing::{whole_set_balance, SmoteConfig};
use crate::classifiers::Classifier;
use crate::dataset::{stratified_split, Dataset, DatasetSummary, Label, SplitPair};
use crate::dynsel::{knop_select, metades_select, metades_train, ola_select, split_dsel, Dsel};
use crate::error::{Error, Result};
use crate::hardness::{hardness_shift, HardnessShift};
use crate::metrics::{
    aggregate, compute_metrics, confusion, AggregateReport, ConfusionMatrix, MetricsReport,
};
use crate::pool::{
    build_pool, single_best, static_selection, train_base, BalanceMode, BaseKind, ClassifierPool,
    PoolConfig,
};

use super::config::{DselPolicy, ExperimentConfig, HardnessData, ModelId, SelectionPool};

const STREAM_SPLIT: u64 = 1;
const STREAM_DSEL: u64 = 2;
const STREAM_POOL: u64 = 3;
const STREAM_SMOTE: u64 = 4;
const STREAM_MODEL: u64 = 5;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent sub-seed for one random stream of an iteration.
pub fn stream_seed(iteration_seed: u64, stream: u64) -> u64 {
    splitmix64(iteration_seed ^ splitmix64(stream))
}

/// Outcome of one (iteration, model, balance) arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub iteration: usize,
    /// Iteration seed every random stream of the run derives from.
    pub seed: u64,
    pub model: ModelId,
    pub balance: BalanceMode,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmFailure {
    pub iteration: usize,
    pub model: ModelId,
    pub balance: BalanceMode,
    pub message: String,
}

/// Where an iteration's train/test boundary fell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub iteration: usize,
    pub seed: u64,
    pub split_seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub test_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub model: ModelId,
    pub balance: BalanceMode,
    pub report: AggregateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub data: DatasetSummary,
    pub splits: Vec<SplitInfo>,
    /// Ordered by iteration, then arm order.
    pub records: Vec<RunRecord>,
    pub failures: Vec<ArmFailure>,
}

impl ExperimentOutcome {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    /// Per-arm mean and standard deviation, in arm order. Arms with no
    /// successful run are left out.
    pub fn aggregates(&self) -> Vec<AggregateRow> {
        let mut rows = Vec::new();
        for (model, balance) in self.config.arms() {
            let runs: Vec<MetricsReport> = self
                .records
                .iter()
                .filter(|r| r.model == model && r.balance == balance)
                .map(|r| r.metrics)
                .collect();
            if let Ok(report) = aggregate(&runs) {
                rows.push(AggregateRow {
                    model,
                    balance,
                    report,
                });
            }
        }
        rows
    }
}

/// Loads the configured dataset and runs every iteration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let data = cfg.dataset.load()?;
    run_experiment_on(cfg, &data)
}

type IterationResult = (SplitInfo, Vec<RunRecord>, Vec<ArmFailure>);

/// Runs every iteration on an already loaded dataset. A failing arm is
/// recorded and the rest of the experiment continues; errors that make a
/// whole iteration impossible (such as an unsplittable dataset) abort.
pub fn run_experiment_on(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let summary = crate::dataset::summarize(data)?;
    for m in &cfg.models {
        if m.is_monolithic() && cfg.balance.contains(&BalanceMode::Bbb) {
            log::warn!("{m}: a single learner has no bootstraps; skipping its bbb arm");
        }
    }
    let arms = cfg.arms();
    let per_iteration: Vec<Result<IterationResult>> = (0..cfg.iterations)
        .into_par_iter()
        .map(|it| {
            let mut ctx = IterationContext::new(cfg, data, it)?;
            let mut records = Vec::new();
            let mut failures = Vec::new();
            for &(model, balance) in &arms {
                match ctx.run_arm(model, balance) {
                    Ok(r) => records.push(r),
                    Err(e) => {
                        log::warn!("iteration {it}, {model}/{balance} failed: {e}");
                        failures.push(ArmFailure {
                            iteration: it,
                            model,
                            balance,
                            message: e.to_string(),
                        });
                    }
                }
            }
            Ok((ctx.split_info(), records, failures))
        })
        .collect();

    let mut outcome = ExperimentOutcome {
        config: cfg.clone(),
        data: summary,
        splits: Vec::new(),
        records: Vec::new(),
        failures: Vec::new(),
    };
    for r in per_iteration {
        let (split, records, failures) = r?;
        outcome.splits.push(split);
        outcome.records.extend(records);
        outcome.failures.extend(failures);
    }
    Ok(outcome)
}

/// Re-runs one cell in isolation. Produces the same metrics as the cell had
/// inside the full experiment.
pub fn run_cell(
    cfg: &ExperimentConfig,
    data: &Dataset,
    iteration: usize,
    model: ModelId,
    balance: BalanceMode,
) -> Result<RunRecord> {
    cfg.validate()?;
    IterationContext::new(cfg, data, iteration)?.run_arm(model, balance)
}

/// kDN before and after whole-set SMOTE on the configured slice of the data
/// (iteration 0's split for `train` and `test`).
pub fn run_hardness(cfg: &ExperimentConfig, data: &Dataset) -> Result<HardnessShift> {
    let seed = cfg.iteration_seed(0);
    let before = match cfg.hardness.data {
        HardnessData::Full => data.clone(),
        HardnessData::Train | HardnessData::Test => {
            let split = stratified_split(data, cfg.test_fraction, stream_seed(seed, STREAM_SPLIT))?;
            if cfg.hardness.data == HardnessData::Train {
                split.train
            } else {
                split.test
            }
        }
    };
    let smote = SmoteConfig {
        seed: cfg.smote.seed.wrapping_add(stream_seed(seed, STREAM_SMOTE)),
        ..cfg.smote
    };
    let after = whole_set_balance(&before, &smote)?;
    hardness_shift(&before, &after, cfg.hardness.k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct PoolKey {
    base: BaseKind,
    forest: bool,
    on_dsel_remainder: bool,
    balance: BalanceMode,
}

struct IterationContext<'a> {
    cfg: &'a ExperimentConfig,
    iteration: usize,
    seed: u64,
    split_seed: u64,
    split: SplitPair,
    pools: HashMap<PoolKey, Arc<ClassifierPool>>,
    dsel_rows: Option<(Dataset, Dataset)>,
    dsels: HashMap<BalanceMode, Arc<Dsel>>,
}

impl<'a> IterationContext<'a> {
    fn new(cfg: &'a ExperimentConfig, data: &Dataset, iteration: usize) -> Result<Self> {
        let seed = cfg.iteration_seed(iteration);
        let split_seed = stream_seed(seed, STREAM_SPLIT);
        let split = stratified_split(data, cfg.test_fraction, split_seed)?;
        Ok(IterationContext {
            cfg,
            iteration,
            seed,
            split_seed,
            split,
            pools: HashMap::new(),
            dsel_rows: None,
            dsels: HashMap::new(),
        })
    }

    fn split_info(&self) -> SplitInfo {
        SplitInfo {
            iteration: self.iteration,
            seed: self.seed,
            split_seed: self.split_seed,
            train_rows: self.split.train.len(),
            test_rows: self.split.test.len(),
            test_positives: self.split.test.class_counts().positive,
        }
    }

    fn smote_config(&self) -> SmoteConfig {
        SmoteConfig {
            seed: self
                .cfg
                .smote
                .seed
                .wrapping_add(stream_seed(self.seed, STREAM_SMOTE)),
            ..self.cfg.smote
        }
    }

    fn run_arm(&mut self, model: ModelId, balance: BalanceMode) -> Result<RunRecord> {
        if model.is_monolithic() && balance == BalanceMode::Bbb {
            return Err(Error::Config(format!(
                "{model} is a single learner and has no bbb arm"
            )));
        }
        let start = Instant::now();
        let predictions = self.predict(model, balance)?;
        let cm = confusion(&predictions, self.split.test.labels());
        Ok(RunRecord {
            iteration: self.iteration,
            seed: self.seed,
            model,
            balance,
            confusion: cm,
            metrics: compute_metrics(&cm),
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    fn predict(&mut self, model: ModelId, balance: BalanceMode) -> Result<Vec<Label>> {
        let base = match model {
            ModelId::DecisionTree => Some(BaseKind::Tree),
            ModelId::Knn => Some(BaseKind::Knn),
            ModelId::NaiveBayes => Some(BaseKind::NaiveBayes),
            _ => None,
        };
        if let Some(kind) = base {
            let train = match balance {
                BalanceMode::WholeSet => {
                    whole_set_balance(&self.split.train, &self.smote_config())?
                }
                _ => self.split.train.clone(),
            };
            let m = train_base(
                kind,
                &train,
                &self.cfg.base,
                None,
                stream_seed(self.seed, STREAM_MODEL),
            )?;
            return Ok(par_predict(&m, &self.split.test));
        }

        match model {
            ModelId::Bagging(kind) => {
                let pool = self.pool(PoolKey {
                    base: kind,
                    forest: false,
                    on_dsel_remainder: false,
                    balance,
                })?;
                Ok(par_predict(&*pool, &self.split.test))
            }
            ModelId::RandomForest => {
                let pool = self.pool(PoolKey {
                    base: BaseKind::Tree,
                    forest: true,
                    on_dsel_remainder: false,
                    balance,
                })?;
                Ok(par_predict(&*pool, &self.split.test))
            }
            _ => self.predict_selected(model, balance),
        }
    }

    fn predict_selected(&mut self, model: ModelId, balance: BalanceMode) -> Result<Vec<Label>> {
        let sel = self.cfg.selection_pool;
        let key = PoolKey {
            base: sel.base_kind(),
            forest: sel == SelectionPool::RandomForest,
            on_dsel_remainder: matches!(self.cfg.dsel, DselPolicy::HoldOut { .. }),
            balance,
        };
        let pool = self.pool(key)?;
        let dsel = self.dsel(balance, &pool)?;
        let test = &self.split.test;
        let cfg = self.cfg;
        Ok(match model {
            ModelId::SingleBest => {
                let best = single_best(&pool, dsel.data(), cfg.ranking_metric)?;
                par_predict(pool.member(best), test)
            }
            ModelId::StaticSelection => {
                let (sub, _) = static_selection(
                    &pool,
                    dsel.data(),
                    cfg.static_keep_fraction,
                    cfg.ranking_metric,
                )?;
                par_predict(&sub, test)
            }
            ModelId::Ola => test
                .rows()
                .par_iter()
                .map(|x| ola_select(&pool, &dsel, x, cfg.ds_k))
                .collect(),
            ModelId::Knop => test
                .rows()
                .par_iter()
                .map(|x| knop_select(&pool, &dsel, x, cfg.ds_k))
                .collect(),
            ModelId::MetaDes => {
                let meta = metades_train(&pool, &dsel, &cfg.metades)?;
                let threshold = cfg.metades.selection_threshold;
                test.rows()
                    .par_iter()
                    .map(|x| metades_select(&meta, &pool, &dsel, x, threshold))
                    .collect()
            }
            other => unreachable!("{other} is not a selection method"),
        })
    }

    /// Pool-training rows and DSEL rows for the selection methods.
    fn dsel_rows(&mut self) -> Result<&(Dataset, Dataset)> {
        if self.dsel_rows.is_none() {
            let rows = match self.cfg.dsel {
                DselPolicy::HoldOut { fraction } => {
                    let min_rows = self
                        .cfg
                        .ds_k
                        .max(self.cfg.metades.k)
                        .max(self.cfg.metades.kp);
                    let s = split_dsel(
                        &self.split.train,
                        fraction,
                        stream_seed(self.seed, STREAM_DSEL),
                        min_rows,
                    )?;
                    (s.pool_train, s.dsel)
                }
                DselPolicy::Reuse => (self.split.train.clone(), self.split.train.clone()),
            };
            self.dsel_rows = Some(rows);
        }
        Ok(self.dsel_rows.as_ref().expect("just filled"))
    }

    fn pool(&mut self, key: PoolKey) -> Result<Arc<ClassifierPool>> {
        if let Some(p) = self.pools.get(&key) {
            return Ok(Arc::clone(p));
        }
        let config = PoolConfig {
            base_kind: key.base,
            n: self.cfg.pool_size,
            balance: key.balance,
            smote: self.smote_config(),
            seed: stream_seed(self.seed, STREAM_POOL),
            rf_feature_subsample: key.forest.then_some(self.cfg.rf_feature_subsample),
            base: self.cfg.base,
        };
        let pool = if key.on_dsel_remainder {
            let (pool_train, _) = self.dsel_rows()?;
            build_pool(pool_train, &config)?
        } else {
            build_pool(&self.split.train, &config)?
        };
        let pool = Arc::new(pool);
        self.pools.insert(key, Arc::clone(&pool));
        Ok(pool)
    }

    fn dsel(&mut self, balance: BalanceMode, pool: &ClassifierPool) -> Result<Arc<Dsel>> {
        if let Some(d) = self.dsels.get(&balance) {
            return Ok(Arc::clone(d));
        }
        let rows = self.dsel_rows()?.1.clone();
        let dsel = Arc::new(Dsel::new(rows, pool)?);
        self.dsels.insert(balance, Arc::clone(&dsel));
        Ok(dsel)
    }
}

fn par_predict<C: Classifier + ?Sized>(model: &C, data: &Dataset) -> Vec<Label> {
    data.rows().par_iter().map(|x| model.predict(x)).collect()
}
