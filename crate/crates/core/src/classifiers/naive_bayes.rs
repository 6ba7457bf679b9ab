use serde::{Deserialize, Serialize};

use super::{Classifier, Support};
use crate::dataset::{Dataset, SparseRow};
use crate::error::{Error, Result};

/// Features above this value count as present.
pub const BINARIZE_THRESHOLD: f64 = 0.5;

/// Bernoulli naive Bayes with Laplace smoothing over binarized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliNb {
    alpha: f64,
    class_count: [usize; 2],
    /// `log p(f | c) - log(1 - p(f | c))`, added for every present feature.
    log_odds: [Vec<f64>; 2],
    /// `sum_f log(1 - p(f | c))`: the all-absent log-likelihood.
    absent: [f64; 2],
}

pub fn train_bernoulli_nb(data: &Dataset, alpha: f64) -> Result<BernoulliNb> {
    if data.is_empty() {
        return Err(Error::Data(
            "cannot train naive Bayes on an empty dataset".into(),
        ));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!(
            "smoothing alpha must be positive, got {alpha}"
        )));
    }
    let d = data.n_features();
    let mut feature_count = [vec![0usize; d], vec![0usize; d]];
    let mut class_count = [0usize; 2];
    for (row, label) in data.iter() {
        let c = label.index();
        class_count[c] += 1;
        for (f, v) in row.iter() {
            if v > BINARIZE_THRESHOLD {
                feature_count[c][f as usize] += 1;
            }
        }
    }

    let mut log_odds = [Vec::with_capacity(d), Vec::with_capacity(d)];
    let mut absent = [0.0; 2];
    for c in 0..2 {
        let denom = class_count[c] as f64 + 2.0 * alpha;
        for &n in &feature_count[c] {
            let p = (n as f64 + alpha) / denom;
            let (lp, lq) = (p.ln(), (1.0 - p).ln());
            log_odds[c].push(lp - lq);
            absent[c] += lq;
        }
    }
    Ok(BernoulliNb {
        alpha,
        class_count,
        log_odds,
        absent,
    })
}

impl BernoulliNb {
    /// Unnormalised joint log-probability `log P(c) + sum_f log P(x_f | c)`.
    pub fn joint_log_likelihood(&self, x: &SparseRow) -> [f64; 2] {
        let total = (self.class_count[0] + self.class_count[1]) as f64;
        let mut out = [0.0; 2];
        for (c, slot) in out.iter_mut().enumerate() {
            let prior = self.class_count[c] as f64 / total;
            let mut ll = prior.ln() + self.absent[c];
            for (f, v) in x.iter() {
                if v > BINARIZE_THRESHOLD {
                    if let Some(o) = self.log_odds[c].get(f as usize) {
                        ll += o;
                    }
                }
            }
            *slot = ll;
        }
        out
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Classifier for BernoulliNb {
    fn support(&self, x: &SparseRow) -> Support {
        let jll = self.joint_log_likelihood(x);
        // A class never seen in training has log-prior -inf.
        if jll[0] == f64::NEG_INFINITY {
            return [0.0, 1.0];
        }
        if jll[1] == f64::NEG_INFINITY {
            return [1.0, 0.0];
        }
        let m = jll[0].max(jll[1]);
        let (a, b) = ((jll[0] - m).exp(), (jll[1] - m).exp());
        [a / (a + b), b / (a + b)]
    }
}
