//! Fairness-aware AdaBoost.
//!
//! Training is ordinary discrete AdaBoost except for the initial
//! distribution. For the accuracy indicator, unfavored samples start at
//! `1/N + lambda/N0` and favored samples at `1/N - lambda/N1`; for FPR and
//! FNR the same shift is applied only inside the `y = -1` or `y = +1`
//! subpopulation and every other sample starts at `1/N`. Each round then
//! fits a tree on the current distribution, sets
//! `alpha = ln((1 - e) / e) / 2` and reweights by `exp(-y * alpha * h(x))`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{hex, Dataset};
use crate::error::{FabError, Result};
use crate::preprocess::{lambda_max, subpopulation_counts, FairnessIndicator};
use crate::tree::{DecisionTree, TreeBuilder, TreeConfig};

/// A probability distribution over the samples of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Allowed deviation of the sum from one.
    pub const SUM_TOLERANCE: f64 = 1e-9;
    /// Most negative entry still accepted (rounding noise).
    pub const NEGATIVE_TOLERANCE: f64 = 1e-12;

    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(FabError::Contract("empty weight vector".into()));
        }
        if let Some((i, v)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < -Self::NEGATIVE_TOLERANCE)
        {
            return Err(FabError::Contract(format!("weight {i} is {v}")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(FabError::Contract(format!("weights sum to {sum}, not 1")));
        }
        Ok(WeightVector(w))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over zero samples");
        WeightVector(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// First 16 hex digits of the SHA-256 of the little-endian bytes.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for v in &self.0 {
            hasher.update(v.to_le_bytes());
        }
        hex(&hasher.finalize()[..8])
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = FabError;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        WeightVector::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FabConfig {
    pub rounds: usize,
    pub lambda: f64,
    pub indicator: FairnessIndicator,
    #[serde(default)]
    pub tree: TreeConfig,
    /// The weighted error is clamped to `[epsilon, 1 - epsilon]` before
    /// computing alpha.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

pub fn default_epsilon() -> f64 {
    1e-12
}

impl FabConfig {
    pub fn new(rounds: usize, lambda: f64, indicator: FairnessIndicator) -> Self {
        FabConfig {
            rounds,
            lambda,
            indicator,
            tree: TreeConfig::default(),
            epsilon: default_epsilon(),
        }
    }

    /// Checks that do not depend on the training data.
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(FabError::Config("rounds must be positive".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(FabError::Config(format!("invalid lambda {}", self.lambda)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(FabError::Config(format!("epsilon {} not in (0, 0.5)", self.epsilon)));
        }
        self.tree.validate()
    }
}

/// Per-round training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Weighted error of the round's tree under the round's distribution.
    pub error: f64,
    pub alpha: f64,
    /// Normalizer of the weight update.
    pub z: f64,
    /// Whether `error` was outside `[epsilon, 1 - epsilon]`.
    pub clamped: bool,
    /// Fingerprint of the distribution the tree was fit on.
    pub weights_hash: String,
    pub weight_sum: f64,
    pub min_weight: f64,
    /// Weighted error of the same tree under the updated distribution.
    pub reweighted_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub rounds: Vec<RoundRecord>,
}

impl TrainingTrace {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub tree: DecisionTree,
    pub alpha: f64,
}

/// `sign(sum_t alpha_t h_t(x))` with `sign(0) = +1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub indicator: FairnessIndicator,
    pub lambda: f64,
    pub rounds: usize,
    pub n_features: usize,
    pub members: Vec<Member>,
    pub trace: TrainingTrace,
}

impl Ensemble {
    fn check_arity(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(FabError::Contract(format!(
                "input has {} features, ensemble expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(())
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        self.members
            .iter()
            .map(|m| m.alpha * f64::from(m.tree.root.predict(x)))
            .sum()
    }

    pub fn decision_score(&self, x: &[f64]) -> Result<f64> {
        self.check_arity(x)?;
        Ok(self.score_unchecked(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<i8> {
        self.decision_score(x).map(sign)
    }

    pub fn decision_scores(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if ds.n_features() != self.n_features {
            return Err(FabError::Contract(format!(
                "dataset has {} features, ensemble expects {}",
                ds.n_features(),
                self.n_features
            )));
        }
        Ok(ds
            .samples()
            .iter()
            .map(|s| self.score_unchecked(&s.features))
            .collect())
    }

    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<i8>> {
        Ok(self.decision_scores(ds)?.into_iter().map(sign).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ens: Ensemble = serde_json::from_str(s)?;
        if ens.members.is_empty() {
            return Err(FabError::Contract("ensemble has no members".into()));
        }
        if ens.members.iter().any(|m| !m.alpha.is_finite()) {
            return Err(FabError::Contract("non-finite alpha".into()));
        }
        Ok(ens)
    }
}

/// Sign with `sign(0) = +1`.
#[inline]
pub fn sign(score: f64) -> i8 {
    if score >= 0.0 {
        1
    } else {
        -1
    }
}

/// Initial distribution for the indicator and lambda.
///
/// `lambda = 0` always gives the uniform distribution. Otherwise lambda
/// must lie in `[0, lambda_max(ds, ind)]`; at the upper end the shifted
/// favored weights are exactly zero.
pub fn init_weights(ds: &Dataset, ind: FairnessIndicator, lambda: f64) -> Result<WeightVector> {
    let n = ds.len();
    if lambda == 0.0 {
        return Ok(WeightVector::uniform(n));
    }
    lambda_max(ds, ind)?.check(lambda)?;
    let (n0, n1) = subpopulation_counts(ds, ind);
    let base = 1.0 / n as f64;
    let raised = base + lambda / n0 as f64;
    let mut lowered = base - lambda / n1 as f64;
    // Snap rounding residue at the boundary lambda = n1 / n to zero.
    if lowered.abs() <= 4.0 * f64::EPSILON * base || lowered < 0.0 {
        lowered = 0.0;
    }
    let w = ds
        .samples()
        .iter()
        .map(|s| match (ind.covers_sample(s), s.is_favored()) {
            (false, _) => base,
            (true, false) => raised,
            (true, true) => lowered,
        })
        .collect();
    WeightVector::new(w)
}

/// Total weight of samples the tree misclassifies.
pub fn weighted_error(tree: &DecisionTree, d: &WeightVector, ds: &Dataset) -> Result<f64> {
    check_weights(d, ds)?;
    let preds = tree.predict_dataset(ds)?;
    Ok(misclassified_mass(d.as_slice(), &preds, ds))
}

fn misclassified_mass(d: &[f64], preds: &[i8], ds: &Dataset) -> f64 {
    d.iter()
        .zip(preds)
        .zip(ds.samples())
        .filter(|((_, &p), s)| p != s.label)
        .map(|((w, _), _)| *w)
        .sum()
}

/// Minimizer of `Z(alpha) = (1 - e) exp(-alpha) + e exp(alpha)` with the
/// error clamped to `[epsilon, 1 - epsilon]`. Negative when `e > 1/2`.
pub fn optimal_alpha(error: f64, epsilon: f64) -> f64 {
    let e = error.clamp(epsilon, 1.0 - epsilon);
    0.5 * ((1.0 - e) / e).ln()
}

/// `D'_i = D_i exp(-y_i alpha h(x_i)) / Z`, returning `(D', Z)`.
pub fn reweight(
    d: &WeightVector,
    alpha: f64,
    tree: &DecisionTree,
    ds: &Dataset,
) -> Result<(WeightVector, f64)> {
    check_weights(d, ds)?;
    let preds = tree.predict_dataset(ds)?;
    let (next, z) = reweight_with(d.as_slice(), alpha, &preds, ds)?;
    Ok((WeightVector::new(next)?, z))
}

fn reweight_with(d: &[f64], alpha: f64, preds: &[i8], ds: &Dataset) -> Result<(Vec<f64>, f64)> {
    let mut next: Vec<f64> = d
        .iter()
        .zip(preds)
        .zip(ds.samples())
        .map(|((w, &h), s)| w * (-(s.y() * alpha * f64::from(h))).exp())
        .collect();
    let z: f64 = next.iter().sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(FabError::Numeric(format!("normalizer Z = {z}")));
    }
    for w in &mut next {
        *w /= z;
    }
    Ok((next, z))
}

fn check_weights(d: &WeightVector, ds: &Dataset) -> Result<()> {
    if d.len() != ds.len() {
        return Err(FabError::Contract(format!(
            "{} weights for {} samples",
            d.len(),
            ds.len()
        )));
    }
    Ok(())
}

/// Train a fairness-aware ensemble for exactly `cfg.rounds` rounds.
pub fn train_fab(train: &Dataset, cfg: &FabConfig) -> Result<Ensemble> {
    cfg.validate()?;
    let mut d = init_weights(train, cfg.indicator, cfg.lambda)?;
    let builder = TreeBuilder::new(train, cfg.tree)?;
    let mut members = Vec::with_capacity(cfg.rounds);
    let mut trace = TrainingTrace::default();
    for _ in 0..cfg.rounds {
        let tree = builder.fit(&d)?;
        let preds = tree.predict_dataset(train)?;
        let error = misclassified_mass(d.as_slice(), &preds, train);
        let alpha = optimal_alpha(error, cfg.epsilon);
        let (next, z) = reweight_with(d.as_slice(), alpha, &preds, train)?;
        let next = WeightVector::new(next)?;
        trace.rounds.push(RoundRecord {
            error,
            alpha,
            z,
            clamped: error < cfg.epsilon || error > 1.0 - cfg.epsilon,
            weights_hash: d.fingerprint(),
            weight_sum: d.sum(),
            min_weight: d.min(),
            reweighted_error: misclassified_mass(next.as_slice(), &preds, train),
        });
        members.push(Member { tree, alpha });
        d = next;
    }
    Ok(Ensemble {
        indicator: cfg.indicator,
        lambda: cfg.lambda,
        rounds: cfg.rounds,
        n_features: train.n_features(),
        members,
        trace,
    })
}

/// Classical discrete AdaBoost from the uniform distribution, using the
/// rounds, tree settings and epsilon of `cfg`. `cfg.lambda` is ignored and
/// the result records `lambda = 0`.
///
/// Kept as a separate loop from [`train_fab`] so the two can be compared.
pub fn train_adaboost(train: &Dataset, cfg: &FabConfig) -> Result<Ensemble> {
    cfg.validate()?;
    let n = train.len();
    let labels = train.labels();
    let builder = TreeBuilder::new(train, cfg.tree)?;
    let mut weights = vec![1.0 / n as f64; n];
    let mut ensemble = Ensemble {
        indicator: cfg.indicator,
        lambda: 0.0,
        rounds: cfg.rounds,
        n_features: train.n_features(),
        members: Vec::with_capacity(cfg.rounds),
        trace: TrainingTrace::default(),
    };
    for _ in 0..cfg.rounds {
        let current = WeightVector::new(weights.clone())?;
        let tree = builder.fit(&current)?;
        let mut error = 0.0;
        let mut margins = Vec::with_capacity(n);
        for (i, s) in train.samples().iter().enumerate() {
            let h = tree.root.predict(&s.features);
            if h != labels[i] {
                error += weights[i];
            }
            margins.push(f64::from(labels[i]) * f64::from(h));
        }
        let clamped_error = error.clamp(cfg.epsilon, 1.0 - cfg.epsilon);
        let alpha = 0.5 * ((1.0 - clamped_error) / clamped_error).ln();
        for (w, m) in weights.iter_mut().zip(&margins) {
            *w *= (-(m * alpha)).exp();
        }
        let z: f64 = weights.iter().sum();
        if !(z > 0.0 && z.is_finite()) {
            return Err(FabError::Numeric(format!("normalizer Z = {z}")));
        }
        weights.iter_mut().for_each(|w| *w /= z);
        let reweighted_error = weights
            .iter()
            .zip(&margins)
            .filter(|(_, &m)| m < 0.0)
            .map(|(w, _)| *w)
            .sum();
        ensemble.trace.rounds.push(RoundRecord {
            error,
            alpha,
            z,
            clamped: clamped_error != error,
            weights_hash: current.fingerprint(),
            weight_sum: current.sum(),
            min_weight: current.min(),
            reweighted_error,
        });
        ensemble.members.push(Member { tree, alpha });
    }
    Ok(ensemble)
}
