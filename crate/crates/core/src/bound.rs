//! Objective losses and the training-set bound `L(f) <= prod_t Z_t`.
//!
//! The signed objective `error + lambda * signed_gap` equals the initial
//! distribution applied to the 0/1 losses, so it is bounded by the
//! exponential sum `sum_i D1_i exp(-y_i F(x_i))`, which telescopes to the
//! product of the round normalizers. The absolute form only inherits the
//! bound when the signed gap is non-negative.

use serde::{Deserialize, Serialize};

use crate::boost::{init_weights, Ensemble, TrainingTrace};
use crate::dataset::Dataset;
use crate::error::{FabError, Result};
use crate::metrics::{confusion, error_rate};
use crate::preprocess::{lambda_max, FairnessIndicator};

/// Absolute slack allowed when comparing against the normalizer product.
pub const ABS_TOLERANCE: f64 = 1e-9;
/// Relative slack allowed when comparing against the normalizer product.
pub const REL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveForm {
    Absolute,
    Signed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub indicator: FairnessIndicator,
    pub lambda: f64,
    pub error_rate: f64,
    pub signed_gap: f64,
    /// `error + lambda * |gap|`.
    pub objective_abs: f64,
    /// `error + lambda * gap`.
    pub objective_signed: f64,
    /// `sum_i D1_i exp(-y_i F(x_i))`.
    pub exponential_sum: f64,
    pub z_product: f64,
    pub holds_signed: bool,
    /// Whether the signed gap is non-negative on the evaluated set.
    pub assumption_satisfied: bool,
    /// `Some` only when the assumption holds.
    pub holds_abs: Option<bool>,
    /// `exponential_sum` equals `z_product` within the relative tolerance.
    pub telescoping_holds: bool,
}

impl BoundReport {
    pub fn certified(&self) -> bool {
        self.holds_signed && self.telescoping_holds && self.holds_abs != Some(false)
    }
}

/// `a <= b` up to the absolute and relative tolerances.
pub fn within_bound(a: f64, b: f64) -> bool {
    a <= b + ABS_TOLERANCE + REL_TOLERANCE * b.abs()
}

fn check_lambda(ds: &Dataset, ind: FairnessIndicator, lambda: f64) -> Result<()> {
    if lambda == 0.0 {
        return Ok(());
    }
    lambda_max(ds, ind)?.check(lambda)
}

/// Objective from predictions.
pub fn objective_from_predictions(
    pred: &[i8],
    ds: &Dataset,
    ind: FairnessIndicator,
    lambda: f64,
    form: ObjectiveForm,
) -> Result<f64> {
    check_lambda(ds, ind, lambda)?;
    let gap = confusion(pred, ds)?.signed_gap(ind)?;
    let err = error_rate(pred, &ds.labels())?;
    Ok(match form {
        ObjectiveForm::Absolute => err + lambda * gap.abs(),
        ObjectiveForm::Signed => err + lambda * gap,
    })
}

pub fn objective_loss(
    ens: &Ensemble,
    ds: &Dataset,
    ind: FairnessIndicator,
    lambda: f64,
    form: ObjectiveForm,
) -> Result<f64> {
    let pred = ens.predict_dataset(ds)?;
    objective_from_predictions(&pred, ds, ind, lambda, form)
}

/// The signed objective written as `sum_i D1_i * [h(x_i) != y_i]`.
pub fn weighted_objective(
    pred: &[i8],
    ds: &Dataset,
    ind: FairnessIndicator,
    lambda: f64,
) -> Result<f64> {
    let d1 = init_weights(ds, ind, lambda)?;
    if pred.len() != ds.len() {
        return Err(FabError::Contract(format!(
            "{} predictions for {} samples",
            pred.len(),
            ds.len()
        )));
    }
    Ok(d1
        .as_slice()
        .iter()
        .zip(pred)
        .zip(ds.samples())
        .filter(|((_, &p), s)| p != s.label)
        .map(|((w, _), _)| *w)
        .sum())
}

/// Product of the round normalizers.
pub fn z_product(trace: &TrainingTrace) -> f64 {
    trace.rounds.iter().map(|r| r.z).product()
}

/// Audit an ensemble against its own training set.
pub fn verify_bound(ens: &Ensemble, train: &Dataset) -> Result<BoundReport> {
    if ens.trace.is_empty() || ens.trace.len() != ens.members.len() {
        return Err(FabError::Contract(format!(
            "trace has {} rounds for {} members",
            ens.trace.len(),
            ens.members.len()
        )));
    }
    let (ind, lambda) = (ens.indicator, ens.lambda);
    let scores = ens.decision_scores(train)?;
    let pred: Vec<i8> = scores.iter().map(|&f| crate::boost::sign(f)).collect();

    let err = error_rate(&pred, &train.labels())?;
    let gap = confusion(&pred, train)?.signed_gap(ind)?;
    let objective_abs = err + lambda * gap.abs();
    let objective_signed = err + lambda * gap;

    let d1 = init_weights(train, ind, lambda)?;
    let exponential_sum: f64 = d1
        .as_slice()
        .iter()
        .zip(&scores)
        .zip(train.samples())
        .map(|((w, f), s)| w * (-s.y() * f).exp())
        .sum();
    let z = z_product(&ens.trace);
    if !(z > 0.0 && z.is_finite()) {
        return Err(FabError::Numeric(format!("normalizer product {z}")));
    }

    let assumption_satisfied = gap >= 0.0;
    Ok(BoundReport {
        indicator: ind,
        lambda,
        error_rate: err,
        signed_gap: gap,
        objective_abs,
        objective_signed,
        exponential_sum,
        z_product: z,
        holds_signed: within_bound(objective_signed, z),
        assumption_satisfied,
        holds_abs: assumption_satisfied.then(|| within_bound(objective_abs, z)),
        telescoping_holds: (exponential_sum - z).abs() <= REL_TOLERANCE * z,
    })
}
