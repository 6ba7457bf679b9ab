//! Base learners sharing one contract: per-class supports that sum to one,
//! and a prediction that is the argmax of those supports.

mod knn;
mod naive_bayes;
mod tree;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label, SparseRow};

pub use knn::{train_knn, Knn};
pub use naive_bayes::{train_bernoulli_nb, BernoulliNb};
pub use tree::{train_decision_tree, DecisionTree, FeatureSubsample, TreeNode, TreeParams};

/// Supports in `[negative, positive]` order.
pub type Support = [f64; 2];

/// Argmax of a support vector. An exact tie goes to the positive class.
pub fn label_from_support(support: Support) -> Label {
    if support[1] >= support[0] {
        Label::Positive
    } else {
        Label::Negative
    }
}

pub trait Classifier: Send + Sync {
    fn support(&self, x: &SparseRow) -> Support;

    fn predict(&self, x: &SparseRow) -> Label {
        label_from_support(self.support(x))
    }

    fn predict_all(&self, data: &Dataset) -> Vec<Label> {
        data.rows().iter().map(|x| self.predict(x)).collect()
    }
}

/// A fitted base learner of any supported kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Tree(DecisionTree),
    Knn(Knn),
    NaiveBayes(BernoulliNb),
}

impl Classifier for Model {
    fn support(&self, x: &SparseRow) -> Support {
        match self {
            Model::Tree(m) => m.support(x),
            Model::Knn(m) => m.support(x),
            Model::NaiveBayes(m) => m.support(x),
        }
    }
}

impl From<DecisionTree> for Model {
    fn from(m: DecisionTree) -> Self {
        Model::Tree(m)
    }
}

impl From<Knn> for Model {
    fn from(m: Knn) -> Self {
        Model::Knn(m)
    }
}

impl From<BernoulliNb> for Model {
    fn from(m: BernoulliNb) -> Self {
        Model::NaiveBayes(m)
    }
}
