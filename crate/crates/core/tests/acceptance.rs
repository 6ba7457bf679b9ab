//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line even when all of them pass.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use imbalanced_ds::balancing::{smote, SmoteConfig};
use imbalanced_ds::classifiers::{train_decision_tree, TreeParams};
use imbalanced_ds::dataset::summarize;
use imbalanced_ds::dynsel::{ola_select, Dsel, DynamicEnsemble, MetaDesConfig, SelectorKind};
use imbalanced_ds::hardness::hardness_shift;
use imbalanced_ds::harness::{
    dynamic_selection_leads, run_cell, DatasetSource, ExperimentConfig, ModelId,
};
use imbalanced_ds::metrics::{compute_metrics, ConfusionMatrix, Metric};
use imbalanced_ds::pool::{
    build_pool, majority_vote, single_best, BalanceMode, BaseKind, ClassifierPool, PoolConfig,
    RankingMetric,
};
use imbalanced_ds::synthetic::{gaussian_blobs, BlobConfig};
use imbalanced_ds::{Classifier, Dataset, Label, SparseRow};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn blobs(seed: u64) -> Dataset {
    gaussian_blobs(&BlobConfig {
        n: 2000,
        imbalance_ratio: 20.0,
        seed,
        ..BlobConfig::default()
    })
    .unwrap()
}

fn dataset_identity() -> Verdict {
    let positives = 5_560;
    let rows = vec![SparseRow::default(); 129_013];
    let labels = (0..rows.len())
        .map(|i| {
            if i < positives {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    let data = Dataset::new(rows, labels, 1).unwrap();
    let s = summarize(&data).unwrap();
    check(
        (s.imbalance_ratio - 22.20).abs() <= 0.005 && s.imbalance_ratio_display() == "22.20",
        format!(
            "IR = {} ({})",
            s.imbalance_ratio,
            s.imbalance_ratio_display()
        ),
    )
}

/// Closed-form re-evaluation. MCC's numerator is computed exactly in
/// integers before the single division.
fn oracle(tp: u64, fp: u64, fn_: u64, tn: u64) -> [f64; 4] {
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let (tpf, fpf, fnf, tnf) = (tp as f64, fp as f64, fn_ as f64, tn as f64);
    let recall = div(tpf, tpf + fnf);
    let specificity = div(tnf, tnf + fpf);
    let f1 = div(2.0 * tpf, 2.0 * tpf + fpf + fnf);
    let g_mean = (recall * specificity).sqrt();
    let num = tp as i128 * tn as i128 - fp as i128 * fn_ as i128;
    let den = ((tpf + fpf) * (tpf + fnf) * (tnf + fpf) * (tnf + fnf)).sqrt();
    [recall, f1, g_mean, div(num as f64, den)]
}

fn metric_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cell = |rng: &mut ChaCha8Rng| {
        if rng.random_bool(0.2) {
            0
        } else {
            rng.random_range(0..10_000u64)
        }
    };
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (tp, fp, fn_, tn) = (
            cell(&mut rng),
            cell(&mut rng),
            cell(&mut rng),
            cell(&mut rng),
        );
        let r = compute_metrics(&ConfusionMatrix::new(tp, fp, fn_, tn));
        let got = [r.recall, r.f1, r.g_mean, r.mcc];
        for (a, b) in got.iter().zip(oracle(tp, fp, fn_, tn)) {
            worst = worst.max((a - b).abs());
        }
    }
    check(
        worst <= 1e-12,
        format!("max abs error {worst:e} over 1000 matrices"),
    )
}

fn segment_residual(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}

fn smote_geometry() -> Verdict {
    let mut worst = 0.0f64;
    let mut unequal = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_min = rng.random_range(1..=15usize);
        let n_maj = rng.random_range(n_min + 1..=60usize);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_min + n_maj {
            rows.push(vec![
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ]);
            labels.push(if i < n_min {
                Label::Positive
            } else {
                Label::Negative
            });
        }
        let data = Dataset::from_dense(&rows, labels).unwrap();
        let out = smote(
            &data,
            &SmoteConfig {
                seed,
                ..SmoteConfig::default()
            },
        )
        .unwrap();
        let c = out.class_counts();
        if c.positive != c.negative {
            unequal += 1;
        }
        let minority: Vec<[f64; 2]> = rows[..n_min].iter().map(|r| [r[0], r[1]]).collect();
        for i in data.len()..out.len() {
            let d = out.row(i).to_dense(2);
            let p = [d[0], d[1]];
            let mut best = f64::INFINITY;
            for a in &minority {
                for b in &minority {
                    best = best.min(segment_residual(p, *a, *b));
                }
            }
            worst = worst.max(best);
        }
    }
    check(
        worst <= 1e-9 && unequal == 0,
        format!("max residual {worst:e}, runs with unequal classes {unequal}/100"),
    )
}

fn degenerate_pool() -> Verdict {
    let data = gaussian_blobs(&BlobConfig {
        n: 400,
        imbalance_ratio: 3.0,
        separation: 1.5,
        seed: 11,
        ..BlobConfig::default()
    })
    .unwrap();
    let dsel_data = gaussian_blobs(&BlobConfig {
        n: 200,
        imbalance_ratio: 3.0,
        separation: 1.5,
        seed: 12,
        ..BlobConfig::default()
    })
    .unwrap();
    let tree = train_decision_tree(
        &data,
        &TreeParams {
            max_depth: Some(2),
            ..TreeParams::default()
        },
    )
    .unwrap();
    let pool = ClassifierPool::from_members(vec![tree.into(); 7], BaseKind::Tree).unwrap();
    let member = pool.member(0).clone();
    let dsel = Dsel::new(dsel_data, &pool).unwrap();
    let ensemble = |kind| {
        DynamicEnsemble::new(
            pool.clone(),
            dsel.clone(),
            kind,
            7,
            &MetaDesConfig::default(),
        )
        .unwrap()
    };
    let (ola, knop, metades) = (
        ensemble(SelectorKind::Ola),
        ensemble(SelectorKind::Knop),
        ensemble(SelectorKind::MetaDes),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..500 {
        let x = SparseRow::from_dense(&[rng.random_range(-4.0..6.0), rng.random_range(-4.0..6.0)]);
        let expected = member.predict(&x);
        let got = [
            ola.predict(&x),
            knop.predict(&x),
            metades.predict(&x),
            majority_vote(&pool, &x, None),
        ];
        if got.iter().any(|&g| g != expected) {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("{mismatches}/500 queries disagree"),
    )
}

fn ola_single_best() -> Verdict {
    let mut mismatches = 0;
    let mut queries = 0;
    for seed in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let blob = |n, s| {
            gaussian_blobs(&BlobConfig {
                n,
                imbalance_ratio: 2.0,
                separation: 1.0,
                seed: s,
                ..BlobConfig::default()
            })
            .unwrap()
        };
        let train = blob(60, 2 * seed);
        let dsel_data = blob(rng.random_range(15..40), 2 * seed + 1);
        let pool = build_pool(
            &train,
            &PoolConfig {
                n: rng.random_range(3..10),
                seed,
                base: imbalanced_ds::pool::BaseParams {
                    max_depth: Some(rng.random_range(1..4)),
                    ..Default::default()
                },
                ..PoolConfig::default()
            },
        )
        .unwrap();
        let best = single_best(&pool, &dsel_data, RankingMetric::Accuracy).unwrap();
        let dsel = Dsel::new(dsel_data.clone(), &pool).unwrap();
        for x in dsel_data.rows() {
            queries += 1;
            if ola_select(&pool, &dsel, x, dsel_data.len()) != pool.member(best).predict(x) {
                mismatches += 1;
            }
        }
    }
    check(
        mismatches == 0,
        format!("{mismatches}/{queries} DSEL queries disagree across 30 pools"),
    )
}

fn hardness_direction() -> Verdict {
    let mut hits = 0;
    for seed in 0..30u64 {
        let before = blobs(seed);
        let after = smote(
            &before,
            &SmoteConfig {
                seed,
                ..SmoteConfig::default()
            },
        )
        .unwrap();
        let s = hardness_shift(&before, &after, 5).unwrap();
        let minority_falls = s.mean_after(Label::Positive) < s.mean_before(Label::Positive);
        let majority_holds = s.mean_after(Label::Negative) >= s.mean_before(Label::Negative);
        if minority_falls && majority_holds {
            hits += 1;
        }
    }
    check(
        hits >= 28,
        format!("{hits}/30 runs show the expected direction"),
    )
}

fn balancing_improves_recall() -> Verdict {
    let model = ModelId::Bagging(BaseKind::Tree);
    let mut recall_wins = 0;
    let mut gmean_wins = 0;
    for seed in 0..30u64 {
        let cfg = ExperimentConfig {
            dataset: DatasetSource::Synthetic(BlobConfig {
                n: 2000,
                imbalance_ratio: 20.0,
                seed,
                ..BlobConfig::default()
            }),
            models: vec![model],
            balance: vec![BalanceMode::None, BalanceMode::WholeSet, BalanceMode::Bbb],
            iterations: 1,
            pool_size: 50,
            seed,
            ..ExperimentConfig::default()
        };
        let data = cfg.dataset.load().unwrap();
        let run = |b| run_cell(&cfg, &data, 0, model, b).unwrap().metrics;
        let (none, whole, bbb) = (
            run(BalanceMode::None),
            run(BalanceMode::WholeSet),
            run(BalanceMode::Bbb),
        );
        if bbb.recall > none.recall {
            recall_wins += 1;
        }
        if bbb.g_mean >= whole.g_mean {
            gmean_wins += 1;
        }
    }
    check(
        recall_wins >= 25 && gmean_wins > 15,
        format!(
            "bbb recall > unbalanced in {recall_wins}/30; bbb G-Mean >= whole-set in {gmean_wins}/30"
        ),
    )
}

fn protocol_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "iterations = 3\npool_size = 10\nseed = 17\n\n[dataset]\nkind = \"synthetic\"\nn = 600\nimbalance_ratio = 10.0\n",
    )
    .unwrap();
    let run = |out: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_imbalanced-ds"))
            .arg("experiment")
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .env("RUST_LOG", "error")
            .status()
            .unwrap();
        assert!(status.success(), "experiment exited with {status}");
        std::fs::read(out.join("results.csv")).unwrap()
    };
    let a = run(&dir.path().join("a"));
    let b = run(&dir.path().join("b"));
    check(
        a == b && !a.is_empty(),
        format!("results.csv {} bytes, identical: {}", a.len(), a == b),
    )
}

/// Ordinal claim on the real corpus. Needs the feature directory and
/// manifest; skipped otherwise.
fn drebin_ordinal() -> Verdict {
    let (Ok(dir), Ok(manifest)) = (
        std::env::var("DREBIN_FEATURE_DIR"),
        std::env::var("DREBIN_MANIFEST"),
    ) else {
        return Verdict::Skip("set DREBIN_FEATURE_DIR and DREBIN_MANIFEST to run".into());
    };
    let cfg = ExperimentConfig {
        dataset: DatasetSource::Drebin {
            feature_dir: dir.into(),
            manifest: manifest.into(),
            min_feature_count: 10,
        },
        iterations: 5,
        ..ExperimentConfig::default()
    };
    let out = imbalanced_ds::harness::run_experiment(&cfg).unwrap();
    let rows = out.aggregates();
    let f1 = dynamic_selection_leads(&rows, Metric::F1);
    let mcc = dynamic_selection_leads(&rows, Metric::Mcc);
    check(
        f1.passed && mcc.passed,
        format!(
            "balanced F1 top-3 {:?}; balanced MCC top-3 {:?}",
            f1.top3, mcc.top3
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 9] = [
        ("dataset identity", Duration::from_secs(1), dataset_identity),
        (
            "metric oracle equivalence",
            Duration::from_secs(1),
            metric_oracle,
        ),
        ("SMOTE geometry", Duration::from_secs(5), smote_geometry),
        (
            "degenerate-pool identities",
            Duration::from_secs(5),
            degenerate_pool,
        ),
        (
            "OLA/single-best reduction",
            Duration::from_secs(10),
            ola_single_best,
        ),
        (
            "hardness direction",
            Duration::from_secs(30),
            hardness_direction,
        ),
        (
            "balancing improves recall",
            Duration::from_secs(300),
            balancing_improves_recall,
        ),
        (
            "protocol determinism",
            Duration::from_secs(120),
            protocol_determinism,
        ),
        ("drebin ordinal ranking", Duration::MAX, drebin_ordinal),
    ];
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let verdict = match verdict {
            Verdict::Pass(d) if elapsed > budget => {
                Verdict::Fail(format!("{d}; took {elapsed:.2?}, budget {budget:?}"))
            }
            v => v,
        };
        match verdict {
            Verdict::Pass(d) => println!("PASS  {name}: {d} ({elapsed:.2?})"),
            Verdict::Fail(d) => {
                failed += 1;
                println!("FAIL  {name}: {d} ({elapsed:.2?})");
            }
            Verdict::Skip(d) => println!("SKIP  {name}: {d}"),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
