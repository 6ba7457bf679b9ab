//! Confusion-matrix metrics that stay informative under class imbalance, and
//! their aggregation over repeated runs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

/// Counts with malware as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(pred: &[Label], truth: &[Label]) -> ConfusionMatrix {
    assert_eq!(
        pred.len(),
        truth.len(),
        "prediction and truth lengths differ"
    );
    let mut cm = ConfusionMatrix::default();
    for (p, t) in pred.iter().zip(truth) {
        match (p, t) {
            (Label::Positive, Label::Positive) => cm.tp += 1,
            (Label::Positive, Label::Negative) => cm.fp += 1,
            (Label::Negative, Label::Positive) => cm.fn_ += 1,
            (Label::Negative, Label::Negative) => cm.tn += 1,
        }
    }
    cm
}

/// Which ratios hit a zero denominator and were reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UndefinedFlags {
    pub recall: bool,
    pub precision: bool,
    pub f1: bool,
    pub specificity: bool,
    pub mcc: bool,
}

impl UndefinedFlags {
    pub fn any(&self) -> bool {
        self.recall || self.precision || self.f1 || self.specificity || self.mcc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub specificity: f64,
    pub g_mean: f64,
    pub mcc: f64,
    pub accuracy: f64,
    pub undefined: UndefinedFlags,
}

fn ratio(num: f64, den: f64, flag: &mut bool) -> f64 {
    if den == 0.0 {
        *flag = true;
        0.0
    } else {
        num / den
    }
}

/// Recall, precision, F1, G-Mean, MCC and accuracy. Undefined ratios are
/// reported as 0 and flagged.
pub fn compute_metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let (tp, fp, fn_, tn) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64, cm.tn as f64);
    let mut undefined = UndefinedFlags::default();
    let recall = ratio(tp, tp + fn_, &mut undefined.recall);
    let precision = ratio(tp, tp + fp, &mut undefined.precision);
    let f1 = ratio(
        2.0 * precision * recall,
        precision + recall,
        &mut undefined.f1,
    );
    let specificity = ratio(tn, tn + fp, &mut undefined.specificity);
    let g_mean = (recall * specificity).sqrt();
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    let mcc = ratio(tp * tn - fp * fn_, den.sqrt(), &mut undefined.mcc);
    let accuracy = if cm.total() == 0 {
        0.0
    } else {
        (tp + tn) / cm.total() as f64
    };
    MetricsReport {
        recall,
        precision,
        f1,
        specificity,
        g_mean,
        mcc,
        accuracy,
        undefined,
    }
}

/// The four metrics reported per model, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Recall,
    F1,
    GMean,
    Mcc,
}

impl Metric {
    pub const REPORTED: [Metric; 4] = [Metric::Recall, Metric::F1, Metric::GMean, Metric::Mcc];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Recall => "recall",
            Metric::F1 => "f1",
            Metric::GMean => "gmean",
            Metric::Mcc => "mcc",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::Recall => "Recall",
            Metric::F1 => "F1 score",
            Metric::GMean => "G-Mean",
            Metric::Mcc => "MCC",
        }
    }

    pub fn of(self, r: &MetricsReport) -> f64 {
        match self {
            Metric::Recall => r.recall,
            Metric::F1 => r.f1,
            Metric::GMean => r.g_mean,
            Metric::Mcc => r.mcc,
        }
    }
}

/// Mean and sample standard deviation on the ×100 display scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// `None` with fewer than two runs.
    pub std: Option<f64>,
}

impl MeanStd {
    pub fn from_values(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() >= 2).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1.0)).sqrt()
        });
        MeanStd {
            mean: mean * 100.0,
            std: std.map(|s| s * 100.0),
        }
    }
}

impl fmt::Display for MeanStd {
    /// `MM.MM(S.SS)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.std {
            Some(s) => write!(f, "{:.2}({:.2})", self.mean, s),
            None => write!(f, "{:.2}(-)", self.mean),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub g_mean: MeanStd,
    pub mcc: MeanStd,
}

impl AggregateReport {
    pub fn get(&self, metric: Metric) -> MeanStd {
        match metric {
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
            Metric::GMean => self.g_mean,
            Metric::Mcc => self.mcc,
        }
    }
}

/// Mean and sample (n - 1) standard deviation of each metric across runs.
pub fn aggregate(runs: &[MetricsReport]) -> Result<AggregateReport> {
    if runs.is_empty() {
        return Err(Error::Config("cannot aggregate zero runs".into()));
    }
    let col = |m: Metric| MeanStd::from_values(&runs.iter().map(|r| m.of(r)).collect::<Vec<_>>());
    Ok(AggregateReport {
        runs: runs.len(),
        recall: col(Metric::Recall),
        f1: col(Metric::F1),
        g_mean: col(Metric::GMean),
        mcc: col(Metric::Mcc),
    })
}
