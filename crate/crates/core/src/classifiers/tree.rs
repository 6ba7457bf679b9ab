use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, Support};
use crate::dataset::{Dataset, SparseRow};
use crate::error::{Error, Result};

/// How many candidate features a random-forest node draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    /// `round(sqrt(n_features))`, at least one.
    Sqrt,
    Count(usize),
}

impl FeatureSubsample {
    pub fn resolve(self, n_features: usize) -> usize {
        match self {
            FeatureSubsample::Sqrt => ((n_features as f64).sqrt().round() as usize).max(1),
            FeatureSubsample::Count(n) => n.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Set for random-forest mode.
    pub feature_subsample: Option<FeatureSubsample>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            feature_subsample: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        counts: [f64; 2],
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classification tree, stored as an arena with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    n_features: usize,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, left).max(walk(nodes, right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    fn leaf_for(&self, x: &SparseRow) -> &[f64; 2] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { counts } => return counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x.get(*feature) <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }
}

impl Classifier for DecisionTree {
    fn support(&self, x: &SparseRow) -> Support {
        let c = self.leaf_for(x);
        let total = c[0] + c[1];
        [c[0] / total, c[1] / total]
    }
}

fn gini_weighted(c: [usize; 2]) -> f64 {
    // n * gini(c); summing these over children and dividing by the parent
    // size gives the weighted child impurity.
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (a, b) = (c[0] as f64, c[1] as f64);
    n - (a * a + b * b) / n
}

struct Split {
    feature: u32,
    threshold: f64,
}

struct Builder<'a> {
    data: &'a Dataset,
    params: &'a TreeParams,
    subsample: Option<usize>,
    rng: ChaCha8Rng,
    /// Per-feature non-zero (value, class) entries of the current node.
    columns: Vec<Vec<(f64, usize)>>,
    touched: Vec<u32>,
}

impl Builder<'_> {
    fn class_counts(&self, rows: &[usize]) -> [usize; 2] {
        let mut c = [0, 0];
        for &r in rows {
            c[self.data.label(r).index()] += 1;
        }
        c
    }

    fn best_split(&mut self, rows: &[usize], counts: [usize; 2]) -> Option<Split> {
        for &r in rows {
            let class = self.data.label(r).index();
            for (f, v) in self.data.row(r).iter() {
                let col = &mut self.columns[f as usize];
                if col.is_empty() {
                    self.touched.push(f);
                }
                col.push((v, class));
            }
        }
        self.touched.sort_unstable();

        let n = rows.len();
        let mut candidates: Vec<u32> = self
            .touched
            .iter()
            .copied()
            .filter(|&f| {
                let col = &self.columns[f as usize];
                col.len() < n || col.iter().any(|(v, _)| *v != col[0].0)
            })
            .collect();
        if let Some(m) = self.subsample {
            if m < candidates.len() {
                let mut picked: Vec<u32> =
                    rand::seq::index::sample(&mut self.rng, candidates.len(), m)
                        .into_iter()
                        .map(|i| candidates[i])
                        .collect();
                picked.sort_unstable();
                candidates = picked;
            }
        }

        let parent = gini_weighted(counts);
        let mut best: Option<(f64, Split)> = None;
        let mut groups: Vec<(f64, [usize; 2])> = Vec::new();
        for &f in &candidates {
            let col = &mut self.columns[f as usize];
            col.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            groups.clear();
            let mut zero = counts;
            for &(_, c) in col.iter() {
                zero[c] -= 1;
            }
            let mut zero_pending = zero[0] + zero[1] > 0;
            for &(v, c) in col.iter() {
                if zero_pending && v > 0.0 {
                    groups.push((0.0, zero));
                    zero_pending = false;
                }
                match groups.last_mut() {
                    Some((gv, gc)) if *gv == v => gc[c] += 1,
                    _ => {
                        let mut gc = [0, 0];
                        gc[c] = 1;
                        groups.push((v, gc));
                    }
                }
            }
            if zero_pending {
                groups.push((0.0, zero));
            }

            let mut left = [0usize, 0usize];
            for w in groups.windows(2) {
                left[0] += w[0].1[0];
                left[1] += w[0].1[1];
                let right = [counts[0] - left[0], counts[1] - left[1]];
                let gain = (parent - gini_weighted(left) - gini_weighted(right)) / n as f64;
                let (a, b) = (w[0].0, w[1].0);
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                if best.as_ref().is_none_or(|(g, _)| gain > *g + 1e-12) {
                    best = Some((
                        gain,
                        Split {
                            feature: f,
                            threshold,
                        },
                    ));
                }
            }
        }

        for &f in &self.touched {
            self.columns[f as usize].clear();
        }
        self.touched.clear();
        best.map(|(_, s)| s)
    }
}

/// Greedy CART tree minimising Gini impurity.
///
/// Among equal-gain splits the lowest feature index wins, then the lowest
/// threshold. Zero-gain splits are accepted, so with unlimited depth a tree
/// fits any training set without conflicting duplicates.
pub fn train_decision_tree(data: &Dataset, params: &TreeParams) -> Result<DecisionTree> {
    if data.is_empty() {
        return Err(Error::Data(
            "cannot train a tree on an empty dataset".into(),
        ));
    }
    let mut b = Builder {
        data,
        params,
        subsample: params
            .feature_subsample
            .map(|s| s.resolve(data.n_features())),
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        columns: vec![Vec::new(); data.n_features()],
        touched: Vec::new(),
    };
    let mut nodes = vec![TreeNode::Leaf { counts: [0.0, 0.0] }];
    let mut stack = vec![(0usize, (0..data.len()).collect::<Vec<_>>(), 0usize)];
    while let Some((id, rows, depth)) = stack.pop() {
        let counts = b.class_counts(&rows);
        let splittable = counts[0] > 0
            && counts[1] > 0
            && rows.len() >= b.params.min_samples_split.max(2)
            && b.params.max_depth.is_none_or(|m| depth < m);
        let split = if splittable {
            b.best_split(&rows, counts)
        } else {
            None
        };
        match split {
            Some(Split { feature, threshold }) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&r| data.row(r).get(feature) <= threshold);
                let left = nodes.len();
                let right = left + 1;
                nodes.push(TreeNode::Leaf { counts: [0.0, 0.0] });
                nodes.push(TreeNode::Leaf { counts: [0.0, 0.0] });
                nodes[id] = TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                stack.push((right, right_rows, depth + 1));
                stack.push((left, left_rows, depth + 1));
            }
            None => {
                nodes[id] = TreeNode::Leaf {
                    counts: [counts[0] as f64, counts[1] as f64],
                }
            }
        }
    }
    Ok(DecisionTree {
        nodes,
        n_features: data.n_features(),
    })
}
