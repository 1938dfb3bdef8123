//! Weighted CART base learner.
//!
//! Trees grow greedily by weighted Gini impurity. Candidate thresholds are
//! midpoints between consecutive distinct values of a feature among the
//! node's positively weighted samples, and a sample goes left when
//! `x[feature] <= threshold`. The sensitive feature is never a split
//! candidate. Zero-weight samples are routed but do not affect candidates,
//! impurities or leaf votes.
//!
//! Ties on impurity reduction go to the lowest feature index, then the lowest
//! threshold, so training is deterministic.

use serde::{Deserialize, Serialize};

use crate::boost::WeightVector;
use crate::dataset::Dataset;
use crate::error::{FabError, Result};

/// Relative slack (in units of node mass) under which two impurity
/// reductions count as equal and a reduction counts as zero.
pub const IMPURITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    /// A split is rejected if either side carries less weight than this.
    pub min_leaf_weight: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 3,
            min_leaf_weight: 0.0,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(FabError::Config("max_depth must be at least 1".into()));
        }
        if self.min_leaf_weight.is_nan() || self.min_leaf_weight < 0.0 {
            return Err(FabError::Config("min_leaf_weight must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature_index: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        prediction: i8,
        /// Weighted `+1` mass minus weighted `-1` mass at the leaf.
        weighted_margin: f64,
    },
}

impl TreeNode {
    fn leaf(margin: f64) -> Self {
        TreeNode::Leaf {
            prediction: if margin >= 0.0 { 1 } else { -1 },
            weighted_margin: margin,
        }
    }

    /// Route `x` to a leaf. Panics if `x` is shorter than a split feature.
    pub fn predict(&self, x: &[f64]) -> i8 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { prediction, .. } => return *prediction,
                TreeNode::Internal {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature_index] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Feature indices used by internal nodes, in pre-order.
    pub fn split_features(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_features(&mut out);
        out
    }

    fn collect_features(&self, out: &mut Vec<usize>) {
        if let TreeNode::Internal {
            feature_index,
            left,
            right,
            ..
        } = self
        {
            out.push(*feature_index);
            left.collect_features(out);
            right.collect_features(out);
        }
    }
}

/// A fitted tree together with the feature arity it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub root: TreeNode,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> Result<i8> {
        if x.len() != self.n_features {
            return Err(FabError::Contract(format!(
                "input has {} features, tree expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(self.root.predict(x))
    }

    /// Predictions for every sample of `ds`.
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<i8>> {
        if ds.n_features() != self.n_features {
            return Err(FabError::Contract(format!(
                "dataset has {} features, tree expects {}",
                ds.n_features(),
                self.n_features
            )));
        }
        Ok(ds.samples().iter().map(|s| self.root.predict(&s.features)).collect())
    }
}

pub fn predict_tree(tree: &DecisionTree, x: &[f64]) -> Result<i8> {
    tree.predict(x)
}

/// Fit one tree. For repeated fits on the same data use [`TreeBuilder`].
pub fn fit_tree(ds: &Dataset, weights: &WeightVector, cfg: &TreeConfig) -> Result<DecisionTree> {
    TreeBuilder::new(ds, *cfg)?.fit(weights)
}

/// Feature columns of a dataset presorted once, reused across fits with
/// different weights.
#[derive(Debug)]
pub struct TreeBuilder<'a> {
    ds: &'a Dataset,
    cfg: TreeConfig,
    /// Candidate features, ascending.
    features: Vec<usize>,
    /// `values[k][i]` is feature `features[k]` of sample `i`.
    values: Vec<Vec<f64>>,
    /// Sample indices sorted by `values[k]` (stable in sample order).
    sorted: Vec<Vec<u32>>,
    positive: Vec<bool>,
}

#[derive(Debug, Clone, Copy)]
struct Split {
    column: usize,
    threshold: f64,
    reduction: f64,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(ds: &'a Dataset, cfg: TreeConfig) -> Result<Self> {
        cfg.validate()?;
        if ds.len() > u32::MAX as usize {
            return Err(FabError::Contract("dataset too large".into()));
        }
        let features: Vec<usize> = (0..ds.n_features())
            .filter(|&f| f != ds.sensitive_index())
            .collect();
        let values: Vec<Vec<f64>> = features
            .iter()
            .map(|&f| ds.samples().iter().map(|s| s.features[f]).collect())
            .collect();
        let sorted = values
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                idx
            })
            .collect();
        let positive = ds.samples().iter().map(|s| s.label == 1).collect();
        Ok(TreeBuilder {
            ds,
            cfg,
            features,
            values,
            sorted,
            positive,
        })
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.ds
    }

    pub fn fit(&self, weights: &WeightVector) -> Result<DecisionTree> {
        let w = weights.as_slice();
        if w.len() != self.ds.len() {
            return Err(FabError::Contract(format!(
                "{} weights for {} samples",
                w.len(),
                self.ds.len()
            )));
        }
        let root = if self.features.is_empty() {
            let all: Vec<u32> = (0..w.len() as u32).collect();
            let (wp, wn) = self.mass(w, &all);
            TreeNode::leaf(wp - wn)
        } else {
            self.grow(w, self.sorted.clone(), 0)
        };
        Ok(DecisionTree {
            n_features: self.ds.n_features(),
            root,
        })
    }

    fn mass(&self, w: &[f64], members: &[u32]) -> (f64, f64) {
        members.iter().fold((0.0, 0.0), |(p, n), &i| {
            let wi = w[i as usize];
            if self.positive[i as usize] {
                (p + wi, n)
            } else {
                (p, n + wi)
            }
        })
    }

    fn grow(&self, w: &[f64], lists: Vec<Vec<u32>>, depth: usize) -> TreeNode {
        let (wp, wn) = self.mass(w, &lists[0]);
        if depth >= self.cfg.max_depth || wp == 0.0 || wn == 0.0 {
            return TreeNode::leaf(wp - wn);
        }
        let Some(split) = self.best_split(w, &lists, wp, wn) else {
            return TreeNode::leaf(wp - wn);
        };
        let col = &self.values[split.column];
        let (left, right): (Vec<Vec<u32>>, Vec<Vec<u32>>) = lists
            .into_iter()
            .map(|list| list.into_iter().partition(|&i| col[i as usize] <= split.threshold))
            .unzip();
        TreeNode::Internal {
            feature_index: self.features[split.column],
            threshold: split.threshold,
            left: Box::new(self.grow(w, left, depth + 1)),
            right: Box::new(self.grow(w, right, depth + 1)),
        }
    }

    fn best_split(&self, w: &[f64], lists: &[Vec<u32>], wp: f64, wn: f64) -> Option<Split> {
        let total = wp + wn;
        let parent = gini_mass(wp, wn);
        let tol = IMPURITY_TOLERANCE * total;
        let min_leaf = self.cfg.min_leaf_weight;
        let mut best: Option<Split> = None;
        for (column, list) in lists.iter().enumerate() {
            let col = &self.values[column];
            let (mut lp, mut ln) = (0.0, 0.0);
            let mut prev: Option<f64> = None;
            for &i in list {
                let i = i as usize;
                let wi = w[i];
                if wi == 0.0 {
                    continue;
                }
                let v = col[i];
                if let Some(pv) = prev {
                    if v > pv {
                        let (rp, rn) = (wp - lp, wn - ln);
                        let (lw, rw) = (lp + ln, rp + rn);
                        if lw >= min_leaf && rw >= min_leaf {
                            let reduction = parent - gini_mass(lp, ln) - gini_mass(rp, rn);
                            let better = match best {
                                None => reduction > tol,
                                Some(b) => reduction > b.reduction + tol,
                            };
                            if better {
                                best = Some(Split {
                                    column,
                                    threshold: midpoint(pv, v),
                                    reduction,
                                });
                            }
                        }
                    }
                }
                if self.positive[i] {
                    lp += wi;
                } else {
                    ln += wi;
                }
                prev = Some(v);
            }
        }
        best
    }
}

/// Gini impurity scaled by node mass: `W * (1 - p^2 - q^2) = 2 * wp * wn / W`.
#[inline]
pub fn gini_mass(wp: f64, wn: f64) -> f64 {
    let w = wp + wn;
    if w <= 0.0 {
        0.0
    } else {
        2.0 * wp * wn / w
    }
}

/// Midpoint of `a < b` that is guaranteed to be `< b`.
#[inline]
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}
