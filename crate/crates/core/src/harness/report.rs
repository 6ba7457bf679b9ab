use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::hardness::HardnessShift;
use crate::metrics::{AggregateReport, MeanStd, Metric};
use crate::pool::BalanceMode;

use super::config::ModelId;
use super::run::{AggregateRow, ExperimentOutcome};

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_MD: &str = "results.md";
pub const RUNS_CSV: &str = "runs.csv";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

/// Mean difference of one metric between two balance modes for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: ModelId,
    pub metric: Metric,
    pub left: BalanceMode,
    pub right: BalanceMode,
    pub left_mean: f64,
    pub right_mean: f64,
    /// `right_mean - left_mean`, in points.
    pub delta: f64,
}

/// One row per (model, metric) for models that have both arms.
pub fn compare_balancing(
    rows: &[AggregateRow],
    left: BalanceMode,
    right: BalanceMode,
) -> Vec<ComparisonRow> {
    let find = |m: ModelId, b: BalanceMode| rows.iter().find(|r| r.model == m && r.balance == b);
    let mut models: Vec<ModelId> = Vec::new();
    for r in rows {
        if !models.contains(&r.model) {
            models.push(r.model);
        }
    }
    let mut out = Vec::new();
    for m in models {
        let (Some(l), Some(r)) = (find(m, left), find(m, right)) else {
            continue;
        };
        for metric in Metric::REPORTED {
            let (lm, rm) = (l.report.get(metric).mean, r.report.get(metric).mean);
            out.push(ComparisonRow {
                model: m,
                metric,
                left,
                right,
                left_mean: lm,
                right_mean: rm,
                delta: rm - lm,
            });
        }
    }
    out
}

/// The arm used as a model's "balanced" result: its bbb arm when it has one,
/// whole-set SMOTE otherwise.
pub fn balanced_arm(rows: &[AggregateRow], model: ModelId) -> Option<&AggregateRow> {
    let find = |b| rows.iter().find(|r| r.model == model && r.balance == b);
    find(BalanceMode::Bbb).or_else(|| find(BalanceMode::WholeSet))
}

/// Models ordered by their balanced mean of `metric`, best first. Ties keep
/// configuration order.
pub fn balanced_ranking(rows: &[AggregateRow], metric: Metric) -> Vec<(ModelId, f64)> {
    let mut models: Vec<ModelId> = Vec::new();
    for r in rows {
        if !models.contains(&r.model) {
            models.push(r.model);
        }
    }
    let mut ranked: Vec<(ModelId, f64)> = models
        .into_iter()
        .filter_map(|m| balanced_arm(rows, m).map(|r| (m, r.report.get(metric).mean)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalCheck {
    pub metric: Metric,
    pub top3: Vec<ModelId>,
    pub passed: bool,
}

/// Whether dynamic selection leads on balanced `metric`: the best model is a
/// dynamic selector and at least two of the top three are.
pub fn dynamic_selection_leads(rows: &[AggregateRow], metric: Metric) -> OrdinalCheck {
    let top3: Vec<ModelId> = balanced_ranking(rows, metric)
        .into_iter()
        .take(3)
        .map(|(m, _)| m)
        .collect();
    let passed = top3.first().is_some_and(|m| m.is_dynamic())
        && top3.iter().filter(|m| m.is_dynamic()).count() >= 2;
    OrdinalCheck {
        metric,
        top3,
        passed,
    }
}

/// Writes `results.csv`: one row per arm, metrics on the ×100 scale.
pub fn write_results_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["model".to_string(), "balance".to_string()];
    for m in Metric::REPORTED {
        header.push(format!("{}_mean", m.name()));
        header.push(format!("{}_std", m.name()));
    }
    header.push("iterations".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let mut rec = vec![r.model.name(), r.balance.name().to_string()];
        for m in Metric::REPORTED {
            let ms = r.report.get(m);
            rec.push(format!("{:.4}", ms.mean));
            rec.push(ms.std.map_or_else(String::new, |s| format!("{s:.4}")));
        }
        rec.push(r.report.runs.to_string());
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads back a `results.csv` written by [`write_results_csv`].
pub fn read_results_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let field = |c: usize| -> Result<&str> {
            rec.get(c).ok_or_else(|| Error::Parse {
                row,
                column: c + 1,
                message: "missing field".into(),
            })
        };
        let num = |c: usize| -> Result<Option<f64>> {
            let s = field(c)?;
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| Error::Parse {
                row,
                column: c + 1,
                message: format!("expected a number, found {s:?}"),
            })
        };
        let ms = |c: usize| -> Result<MeanStd> {
            let mean = num(c)?.ok_or_else(|| Error::Parse {
                row,
                column: c + 1,
                message: "empty mean".into(),
            })?;
            Ok(MeanStd {
                mean,
                std: num(c + 1)?,
            })
        };
        let runs = field(10)?.parse().map_err(|_| Error::Parse {
            row,
            column: 11,
            message: "expected an iteration count".into(),
        })?;
        rows.push(AggregateRow {
            model: field(0)?.parse()?,
            balance: field(1)?.parse()?,
            report: AggregateReport {
                runs,
                recall: ms(2)?,
                f1: ms(4)?,
                g_mean: ms(6)?,
                mcc: ms(8)?,
            },
        });
    }
    Ok(rows)
}

/// Markdown table with one row per model and a `MM.MM(S.SS)` column per
/// balance mode and metric. Missing arms show as `-`.
pub fn results_markdown(rows: &[AggregateRow]) -> String {
    let mut models: Vec<ModelId> = Vec::new();
    let mut modes: Vec<BalanceMode> = Vec::new();
    for r in rows {
        if !models.contains(&r.model) {
            models.push(r.model);
        }
        if !modes.contains(&r.balance) {
            modes.push(r.balance);
        }
    }
    let mut s = String::from("| Model |");
    let mut rule = String::from("|---|");
    for b in &modes {
        for m in Metric::REPORTED {
            let _ = write!(s, " {} {} |", m.title(), b);
            rule.push_str("---|");
        }
    }
    s.push('\n');
    s.push_str(&rule);
    s.push('\n');
    for model in models {
        let _ = write!(s, "| {model} |");
        for &b in &modes {
            let arm = rows.iter().find(|r| r.model == model && r.balance == b);
            for m in Metric::REPORTED {
                match arm {
                    Some(a) => {
                        let _ = write!(s, " {} |", a.report.get(m));
                    }
                    None => s.push_str(" - |"),
                }
            }
        }
        s.push('\n');
    }
    s
}

pub fn write_comparison_csv(rows: &[ComparisonRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "model",
        "metric",
        "left",
        "right",
        "left_mean",
        "right_mean",
        "delta",
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.model.name(),
            r.metric.name().to_string(),
            r.left.name().to_string(),
            r.right.name().to_string(),
            format!("{:.4}", r.left_mean),
            format!("{:.4}", r.right_mean),
            format!("{:.4}", r.delta),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-instance scores, per-class CDFs and class means before and after
/// balancing. Returns the files written.
pub fn write_hardness(shift: &HardnessShift, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (stage, report) in [("before", &shift.before), ("after", &shift.after)] {
        let p = dir.join(format!("kdn_{stage}.csv"));
        report.write_scores_csv(&p)?;
        written.push(p);
        for label in Label::ALL {
            let p = dir.join(format!("kdn_cdf_{stage}_{}.csv", label.name()));
            report.write_cdf_csv(Some(label), &p)?;
            written.push(p);
        }
    }
    let p = dir.join("kdn_summary.csv");
    let mut w = csv::Writer::from_path(&p).map_err(|e| csv_err(&p, e))?;
    w.write_record(["class", "mean_before", "mean_after", "delta"])
        .map_err(|e| csv_err(&p, e))?;
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.6}"));
    for label in Label::ALL {
        w.write_record([
            label.name().to_string(),
            fmt(shift.mean_before(label)),
            fmt(shift.mean_after(label)),
            fmt(shift.delta(label)),
        ])
        .map_err(|e| csv_err(&p, e))?;
    }
    w.flush().map_err(|e| Error::io(&p, e))?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    outcome: Option<&'a ExperimentOutcome>,
    files: Vec<String>,
}

/// What to put in an output directory.
#[derive(Debug, Default, Clone, Copy)]
pub struct ReportBundle<'a> {
    pub outcome: Option<&'a ExperimentOutcome>,
    pub comparison: Option<&'a [ComparisonRow]>,
    pub hardness: Option<&'a HardnessShift>,
}

/// Writes every requested report plus `manifest.json` into `dir`. An
/// experiment without successful runs yields the manifest alone.
pub fn emit_reports(bundle: &ReportBundle<'_>, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    if let Some(outcome) = bundle.outcome {
        if outcome.records.is_empty() {
            log::warn!("no run succeeded; writing the manifest only");
        } else {
            let rows = outcome.aggregates();
            let p = dir.join(RESULTS_CSV);
            write_results_csv(&rows, &p)?;
            written.push(p);
            let p = dir.join(RESULTS_MD);
            fs::write(&p, results_markdown(&rows)).map_err(|e| Error::io(&p, e))?;
            written.push(p);
            let p = dir.join(RUNS_CSV);
            write_runs_csv(outcome, &p)?;
            written.push(p);
        }
    }
    if let Some(rows) = bundle.comparison {
        let p = dir.join(COMPARISON_CSV);
        write_comparison_csv(rows, &p)?;
        written.push(p);
    }
    if let Some(shift) = bundle.hardness {
        written.extend(write_hardness(shift, dir)?);
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        outcome: bundle.outcome,
        files: written
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
    };
    let p = dir.join(MANIFEST_JSON);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serde(e.to_string()))?;
    fs::write(&p, json).map_err(|e| Error::io(&p, e))?;
    written.push(p);
    Ok(written)
}

fn write_runs_csv(outcome: &ExperimentOutcome, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "iteration",
        "seed",
        "model",
        "balance",
        "tp",
        "fp",
        "fn",
        "tn",
        "recall",
        "precision",
        "f1",
        "gmean",
        "mcc",
        "wall_time_ms",
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in &outcome.records {
        let m = &r.metrics;
        w.write_record([
            r.iteration.to_string(),
            r.seed.to_string(),
            r.model.name(),
            r.balance.name().to_string(),
            r.confusion.tp.to_string(),
            r.confusion.fp.to_string(),
            r.confusion.fn_.to_string(),
            r.confusion.tn.to_string(),
            format!("{:.6}", m.recall),
            format!("{:.6}", m.precision),
            format!("{:.6}", m.f1),
            format!("{:.6}", m.g_mean),
            format!("{:.6}", m.mcc),
            format!("{:.3}", r.wall_time_ms),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Serde(format!("{}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::aggregate;
    use crate::metrics::{compute_metrics, ConfusionMatrix};
    use crate::pool::BaseKind;

    fn row(model: ModelId, balance: BalanceMode, tp: u64) -> AggregateRow {
        let a = compute_metrics(&ConfusionMatrix::new(tp, 2, 10 - tp, 40));
        let b = compute_metrics(&ConfusionMatrix::new(tp.saturating_sub(1), 3, 11 - tp, 39));
        AggregateRow {
            model,
            balance,
            report: aggregate(&[a, b]).unwrap(),
        }
    }

    #[test]
    fn results_csv_round_trips() {
        let rows = vec![
            row(ModelId::Knop, BalanceMode::None, 6),
            row(ModelId::Knop, BalanceMode::Bbb, 8),
            row(ModelId::DecisionTree, BalanceMode::WholeSet, 7),
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_results_csv(&rows, &p).unwrap();
        let back = read_results_csv(&p).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!((a.model, a.balance), (b.model, b.balance));
            for m in Metric::REPORTED {
                assert!((a.report.get(m).mean - b.report.get(m).mean).abs() < 1e-4);
            }
        }
        let md = results_markdown(&back);
        assert!(md.lines().nth(2).unwrap().starts_with("| knop |"));
        assert!(md.contains(" - |"), "decision_tree has no none/bbb arm");
    }

    #[test]
    fn comparison_deltas() {
        let rows = vec![
            row(ModelId::Knop, BalanceMode::None, 6),
            row(ModelId::Knop, BalanceMode::Bbb, 8),
            row(ModelId::Ola, BalanceMode::None, 6),
        ];
        let cmp = compare_balancing(&rows, BalanceMode::None, BalanceMode::Bbb);
        assert_eq!(cmp.len(), 4);
        assert!(cmp.iter().all(|c| c.model == ModelId::Knop));
        let recall = &cmp[0];
        assert_eq!(recall.metric, Metric::Recall);
        assert!((recall.delta - 20.0).abs() < 1e-9);

        let same = compare_balancing(&rows, BalanceMode::None, BalanceMode::None);
        assert!(same.iter().all(|c| c.delta == 0.0));
    }

    #[test]
    fn ordinal_check() {
        let rows = vec![
            row(ModelId::Knop, BalanceMode::Bbb, 9),
            row(ModelId::MetaDes, BalanceMode::Bbb, 8),
            row(ModelId::Bagging(BaseKind::Tree), BalanceMode::Bbb, 7),
            row(ModelId::DecisionTree, BalanceMode::WholeSet, 6),
        ];
        let c = dynamic_selection_leads(&rows, Metric::F1);
        assert!(c.passed);
        assert_eq!(c.top3[2], ModelId::Bagging(BaseKind::Tree));

        let rows = vec![
            row(ModelId::Knop, BalanceMode::Bbb, 9),
            row(ModelId::DecisionTree, BalanceMode::WholeSet, 8),
            row(ModelId::Bagging(BaseKind::Tree), BalanceMode::Bbb, 7),
        ];
        assert!(!dynamic_selection_leads(&rows, Metric::F1).passed);
    }
}
