//! Test-only oracles and random instance generators shared by the
//! integration tests and the acceptance suite.
#![allow(dead_code)]

use fab_core::dataset::{Dataset, Sample};
use fab_core::preprocess::rng;
use fab_core::tree::TreeNode;
use fab_core::WeightVector;
use rand::Rng;
use rand_pcg::Pcg64;

/// Dataset whose last column is the sensitive attribute; both groups are
/// forced to be present.
pub fn random_dataset(r: &mut Pcg64, n: usize, features: usize, levels: u32) -> Dataset {
    assert!(n >= 2);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let g = match i {
            0 => 0,
            1 => 1,
            _ => u8::from(r.random_bool(0.5)),
        };
        let mut x: Vec<f64> = (0..features)
            .map(|_| f64::from(r.random_range(0..levels)))
            .collect();
        // Labels loosely follow the first feature so trees have signal.
        let p = 0.25 + 0.5 * x[0] / f64::from(levels.max(2) - 1);
        let y = if r.random_bool(p.clamp(0.05, 0.95)) { 1 } else { -1 };
        x.push(f64::from(g));
        samples.push(Sample::new(x, y, g).unwrap());
    }
    let mut names: Vec<String> = (0..features).map(|j| format!("f{j}")).collect();
    names.push("s".into());
    Dataset::new(samples, names, features).unwrap()
}

/// Random distribution; roughly `zero_share` of the entries are exactly 0.
pub fn random_weights(r: &mut Pcg64, n: usize, zero_share: f64) -> WeightVector {
    let mut w: Vec<f64> = (0..n)
        .map(|_| if r.random_bool(zero_share) { 0.0 } else { r.random_range(0.05..1.0) })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        w[0] = 1.0;
    }
    let sum: f64 = w.iter().sum();
    WeightVector::new(w.into_iter().map(|v| v / sum).collect()).unwrap()
}

pub fn seeded(seed: u64) -> Pcg64 {
    rng(seed)
}

/// Weighted Gini impurity of a node written as `W - (wp^2 + wn^2) / W`.
fn impurity(wp: f64, wn: f64) -> f64 {
    let w = wp + wn;
    if w <= 0.0 {
        0.0
    } else {
        w - (wp * wp + wn * wn) / w
    }
}

/// One tie-branch outcome of the greedy search.
#[derive(Debug, Clone)]
pub struct OracleTree {
    pub error: f64,
    /// Node list in preorder: `(feature, threshold)` or `(leaf prediction)`.
    pub shape: Vec<String>,
}

pub struct GreedyOracle<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [i8],
    pub w: &'a [f64],
    pub features: Vec<usize>,
    pub max_depth: usize,
    /// Set when some choice had more than one admissible option.
    pub saw_tie: std::cell::Cell<bool>,
}

/// Relative tolerance under which two impurity reductions count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Cap on enumerated alternatives per node.
const MAX_ALTERNATIVES: usize = 512;

impl<'a> GreedyOracle<'a> {
    pub fn new(ds: &Dataset, w: &'a [f64], x: &'a [Vec<f64>], y: &'a [i8], max_depth: usize) -> Self {
        GreedyOracle {
            x,
            y,
            w,
            features: (0..ds.n_features()).filter(|&f| f != ds.sensitive_index()).collect(),
            max_depth,
            saw_tie: std::cell::Cell::new(false),
        }
    }

    fn masses(&self, idx: &[usize]) -> (f64, f64) {
        let mut wp = 0.0;
        let mut wn = 0.0;
        for &i in idx {
            if self.y[i] == 1 {
                wp += self.w[i];
            } else {
                wn += self.w[i];
            }
        }
        (wp, wn)
    }

    fn leaves(&self, wp: f64, wn: f64) -> Vec<OracleTree> {
        let plus = OracleTree { error: wn, shape: vec!["+1".into()] };
        let minus = OracleTree { error: wp, shape: vec!["-1".into()] };
        if (wp - wn).abs() <= TIE_TOLERANCE * (wp + wn).max(1e-300) {
            self.saw_tie.set(true);
            vec![plus, minus]
        } else if wp > wn {
            vec![plus]
        } else {
            vec![minus]
        }
    }

    /// Every outcome the greedy Gini search can reach from `idx`,
    /// branching over tied choices.
    pub fn solve(&self, idx: &[usize], depth: usize) -> Vec<OracleTree> {
        let (wp, wn) = self.masses(idx);
        if depth >= self.max_depth || wp == 0.0 || wn == 0.0 {
            return self.leaves(wp, wn);
        }
        let total = wp + wn;
        let parent = impurity(wp, wn);
        let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
        for &f in &self.features {
            let mut vals: Vec<f64> = idx
                .iter()
                .filter(|&&i| self.w[i] > 0.0)
                .map(|&i| self.x[i][f])
                .collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for pair in vals.windows(2) {
                let t = (pair[0] + pair[1]) / 2.0;
                let left: Vec<usize> = idx.iter().copied().filter(|&i| self.x[i][f] <= t).collect();
                let right: Vec<usize> = idx.iter().copied().filter(|&i| self.x[i][f] > t).collect();
                let (lp, ln) = self.masses(&left);
                let (rp, rn) = self.masses(&right);
                candidates.push((f, t, parent - impurity(lp, ln) - impurity(rp, rn)));
            }
        }
        let tol = TIE_TOLERANCE * total;
        let best = candidates.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
        let mut out = Vec::new();
        if best <= tol {
            if best > -tol && !candidates.is_empty() {
                // Reduction indistinguishable from zero: splitting or not are both reachable.
                self.saw_tie.set(true);
            } else {
                return self.leaves(wp, wn);
            }
            out.extend(self.leaves(wp, wn));
        }
        let tied: Vec<&(usize, f64, f64)> = candidates.iter().filter(|c| c.2 >= best - tol).collect();
        if tied.len() > 1 {
            self.saw_tie.set(true);
        }
        for &&(f, t, _) in &tied {
            let left: Vec<usize> = idx.iter().copied().filter(|&i| self.x[i][f] <= t).collect();
            let right: Vec<usize> = idx.iter().copied().filter(|&i| self.x[i][f] > t).collect();
            let ls = self.solve(&left, depth + 1);
            let rs = self.solve(&right, depth + 1);
            for l in &ls {
                for r in &rs {
                    if out.len() >= MAX_ALTERNATIVES {
                        return out;
                    }
                    let mut shape = vec![format!("x{f}<={t}")];
                    shape.extend(l.shape.iter().cloned());
                    shape.extend(r.shape.iter().cloned());
                    out.push(OracleTree { error: l.error + r.error, shape });
                }
            }
        }
        out
    }
}

pub fn shape_of(node: &TreeNode) -> Vec<String> {
    match node {
        TreeNode::Leaf { prediction, .. } => vec![format!("{prediction:+}")],
        TreeNode::Internal { feature_index, threshold, left, right } => {
            let mut v = vec![format!("x{feature_index}<={threshold}")];
            v.extend(shape_of(left));
            v.extend(shape_of(right));
            v
        }
    }
}

/// Minimum weighted training error over every tree of depth at most
/// `depth` with midpoint thresholds and majority leaves.
pub fn exhaustive_optimum(x: &[Vec<f64>], y: &[i8], w: &[f64], features: &[usize], idx: &[usize], depth: usize) -> f64 {
    let (mut wp, mut wn) = (0.0, 0.0);
    for &i in idx {
        if y[i] == 1 {
            wp += w[i];
        } else {
            wn += w[i];
        }
    }
    let mut best = wp.min(wn);
    if depth == 0 {
        return best;
    }
    for &f in features {
        let mut vals: Vec<f64> = idx.iter().map(|&i| x[i][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for pair in vals.windows(2) {
            let t = (pair[0] + pair[1]) / 2.0;
            let left: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] <= t).collect();
            let right: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] > t).collect();
            let e = exhaustive_optimum(x, y, w, features, &left, depth - 1)
                + exhaustive_optimum(x, y, w, features, &right, depth - 1);
            best = best.min(e);
        }
    }
    best
}

/// Weighted training error of an arbitrary tree.
pub fn tree_error(root: &TreeNode, x: &[Vec<f64>], y: &[i8], w: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(w)
        .filter(|((xi, &yi), _)| root.predict(xi) != yi)
        .map(|(_, wi)| *wi)
        .sum()
}

/// Outcome of comparing one fitted tree against the greedy oracle.
pub struct OracleCheck {
    pub matched: bool,
    pub fitted_error: f64,
    pub oracle_errors: Vec<f64>,
    pub tie: bool,
    pub global_optimum: f64,
}

/// Fit a tree on `ds` with `w` and compare with the greedy oracle.
pub fn check_tree_against_oracle(ds: &Dataset, w: &WeightVector, max_depth: usize) -> OracleCheck {
    use fab_core::tree::{fit_tree, TreeConfig};
    let x: Vec<Vec<f64>> = ds.samples().iter().map(|s| s.features.clone()).collect();
    let y = ds.labels();
    let ws = w.as_slice();
    let tree = fit_tree(ds, w, &TreeConfig { max_depth, min_leaf_weight: 0.0 }).unwrap();
    let fitted_error = tree_error(&tree.root, &x, &y, ws);
    let oracle = GreedyOracle::new(ds, ws, &x, &y, max_depth);
    let all: Vec<usize> = (0..ds.len()).collect();
    let outcomes = oracle.solve(&all, 0);
    let tie = oracle.saw_tie.get();
    let shape = shape_of(&tree.root);
    let error_ok = outcomes.iter().any(|o| (o.error - fitted_error).abs() <= 1e-9);
    let shape_ok = tie || (outcomes.len() == 1 && outcomes[0].shape == shape);
    let features = oracle.features.clone();
    OracleCheck {
        matched: error_ok && shape_ok,
        fitted_error,
        oracle_errors: outcomes.iter().map(|o| o.error).collect(),
        tie,
        global_optimum: exhaustive_optimum(&x, &y, ws, &features, &all, max_depth),
    }
}
