use std::fs;

use proptest::prelude::*;

use imbalanced_ds::dataset::{ingest_drebin, load_csv, write_csv};
use imbalanced_ds::harness::{
    run_cell, run_experiment_on, DatasetSource, ExperimentConfig, ModelId,
};
use imbalanced_ds::metrics::Metric;
use imbalanced_ds::pool::{BalanceMode, BaseKind};
use imbalanced_ds::synthetic::BlobConfig;
use imbalanced_ds::{Error, Label};

fn blob_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSource::Synthetic(BlobConfig {
            n: 300,
            imbalance_ratio: 8.0,
            seed,
            ..BlobConfig::default()
        }),
        models: vec![
            ModelId::DecisionTree,
            ModelId::Bagging(BaseKind::Tree),
            ModelId::StaticSelection,
            ModelId::MetaDes,
        ],
        iterations: 4,
        pool_size: 6,
        seed,
        ..ExperimentConfig::default()
    }
}

#[test]
fn aggregates_lie_within_per_run_range() {
    let cfg = blob_config(4);
    let data = cfg.dataset.load().unwrap();
    let out = run_experiment_on(&cfg, &data).unwrap();
    assert!(out.failures.is_empty(), "{:?}", out.failures);
    for row in out.aggregates() {
        for metric in Metric::REPORTED {
            let vals: Vec<f64> = out
                .records
                .iter()
                .filter(|r| r.model == row.model && r.balance == row.balance)
                .map(|r| metric.of(&r.metrics) * 100.0)
                .collect();
            assert_eq!(vals.len(), cfg.iterations);
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mean = row.report.get(metric).mean;
            assert!(
                lo - 1e-9 <= mean && mean <= hi + 1e-9,
                "{} {}",
                row.model,
                metric.name()
            );
        }
    }
}

#[test]
fn records_are_unique_per_cell_and_reproducible() {
    let cfg = blob_config(9);
    let data = cfg.dataset.load().unwrap();
    let out = run_experiment_on(&cfg, &data).unwrap();
    let mut keys: Vec<(usize, String, BalanceMode)> = out
        .records
        .iter()
        .map(|r| (r.iteration, r.model.name(), r.balance))
        .collect();
    let n = keys.len();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), n);

    for r in out.records.iter().filter(|r| r.iteration == 2) {
        let again = run_cell(&cfg, &data, r.iteration, r.model, r.balance).unwrap();
        assert_eq!(again.metrics, r.metrics);
        assert_eq!(again.confusion, r.confusion);
        assert_eq!(again.seed, cfg.seed + 2);
    }
    // A second full run matches record for record.
    let again = run_experiment_on(&cfg, &data).unwrap();
    let strip = |o: &imbalanced_ds::harness::ExperimentOutcome| {
        o.records
            .iter()
            .map(|r| (r.metrics, r.confusion))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&out), strip(&again));
}

#[test]
fn test_rows_stay_fixed_across_arms() {
    // Every arm of an iteration is scored on the same test split.
    let cfg = blob_config(1);
    let data = cfg.dataset.load().unwrap();
    let out = run_experiment_on(&cfg, &data).unwrap();
    for it in 0..cfg.iterations {
        let totals: Vec<(u64, u64)> = out
            .records
            .iter()
            .filter(|r| r.iteration == it)
            .map(|r| {
                let c = r.confusion;
                (c.tp + c.fn_, c.fp + c.tn)
            })
            .collect();
        assert!(totals.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(totals[0].0 + totals[0].1, out.splits[it].test_rows as u64);
    }
}

fn write_corpus(root: &std::path::Path) {
    let fv = root.join("feature_vectors");
    fs::create_dir_all(&fv).unwrap();
    let apps: [(&str, &[&str]); 5] = [
        (
            "aa01",
            &[
                "permission::SEND_SMS",
                "api_call::getDeviceId",
                "url::ads.example",
            ],
        ),
        ("bb02", &["permission::INTERNET", "url::ads.example"]),
        ("cc03", &["permission::SEND_SMS", "api_call::getDeviceId"]),
        ("dd04", &["permission::INTERNET", "permission::INTERNET"]),
        ("ee05", &["permission::SEND_SMS", "intent::BOOT_COMPLETED"]),
    ];
    for (id, feats) in apps {
        fs::write(fv.join(id), feats.join("\n") + "\n").unwrap();
    }
    fs::write(
        root.join("malware.csv"),
        "sha256,family\naa01,FakeInst\ncc03,Opfake\n",
    )
    .unwrap();
}

#[test]
fn drebin_ingest_round_trips_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let data = ingest_drebin(
        dir.path().join("feature_vectors"),
        dir.path().join("malware.csv"),
        2,
    )
    .unwrap();
    assert_eq!(
        data.vocabulary().unwrap(),
        &[
            "api_call::getDeviceId",
            "permission::INTERNET",
            "permission::SEND_SMS",
            "url::ads.example"
        ]
    );
    assert_eq!(data.len(), 5);
    assert_eq!(
        data.labels()
            .iter()
            .filter(|l| **l == Label::Positive)
            .count(),
        2
    );
    assert_eq!(data.row(0).indices(), &[0, 2, 3]);
    assert_eq!(data.row(3).indices(), &[1], "repeated lines count once");
    assert!(data.row(4).indices() == [2], "below-cutoff feature dropped");

    let csv = dir.path().join("drebin.csv");
    write_csv(&data, &csv).unwrap();
    let back = load_csv(&csv).unwrap();
    assert_eq!(back, data);
}

#[test]
fn drebin_manifest_entry_without_file_is_consistency_error() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    fs::write(dir.path().join("malware.csv"), "sha256\naa01\nzz99\n").unwrap();
    let err = ingest_drebin(
        dir.path().join("feature_vectors"),
        dir.path().join("malware.csv"),
        1,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Consistency(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn experiment_on_random_blobs_never_panics(
        seed in 0u64..1000,
        ir in 2.0f64..15.0,
        n in 80usize..200,
    ) {
        let cfg = ExperimentConfig {
            dataset: DatasetSource::Synthetic(BlobConfig { n, imbalance_ratio: ir, seed, ..BlobConfig::default() }),
            models: vec![ModelId::Knn, ModelId::RandomForest, ModelId::Ola, ModelId::Knop],
            iterations: 2,
            pool_size: 4,
            ds_k: 3,
            seed,
            ..ExperimentConfig::default()
        };
        let data = cfg.dataset.load().unwrap();
        let out = run_experiment_on(&cfg, &data).unwrap();
        prop_assert_eq!(out.records.len() + out.failures.len(), cfg.arms().len() * 2);
        for r in &out.records {
            for m in [r.metrics.recall, r.metrics.f1, r.metrics.g_mean] {
                prop_assert!((0.0..=1.0).contains(&m));
            }
            prop_assert!((-1.0..=1.0).contains(&r.metrics.mcc));
        }
    }
}
