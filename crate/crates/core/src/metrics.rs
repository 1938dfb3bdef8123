//! Accuracy, per-group confusion counts and fairness losses.
//!
//! Rates are plain empirical frequencies on the evaluation set. The signed
//! gap is `rate(S=0) - rate(S=1)` of the indicator's error rate, so it is
//! positive when the favored group does better; the fairness loss is its
//! absolute value.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{FabError, Result};
use crate::preprocess::FairnessIndicator;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn errors(&self) -> usize {
        self.false_pos + self.false_neg
    }

    /// `(errors, denominator)` of the indicator's error rate.
    pub fn error_counts(&self, ind: FairnessIndicator) -> (usize, usize) {
        match ind {
            FairnessIndicator::Accuracy => (self.errors(), self.total()),
            FairnessIndicator::Fpr => (self.false_pos, self.false_pos + self.true_neg),
            FairnessIndicator::Fnr => (self.false_neg, self.false_neg + self.true_pos),
        }
    }
}

/// Confusion counts split by sensitive group; index 0 is `S=0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub unfavored: Confusion,
    pub favored: Confusion,
}

impl GroupConfusion {
    pub fn group(&self, sensitive: u8) -> &Confusion {
        if sensitive == 1 {
            &self.favored
        } else {
            &self.unfavored
        }
    }

    pub fn total(&self) -> usize {
        self.unfavored.total() + self.favored.total()
    }

    /// Error rate of one group for the indicator.
    pub fn group_error_rate(&self, sensitive: u8, ind: FairnessIndicator) -> Result<f64> {
        let (err, denom) = self.group(sensitive).error_counts(ind);
        if denom == 0 {
            return Err(FabError::UndefinedRate(format!(
                "{ind} rate of group S={sensitive} has no samples"
            )));
        }
        Ok(err as f64 / denom as f64)
    }

    /// `rate(S=0) - rate(S=1)`.
    pub fn signed_gap(&self, ind: FairnessIndicator) -> Result<f64> {
        Ok(self.group_error_rate(0, ind)? - self.group_error_rate(1, ind)?)
    }
}

fn check_len(pred: &[i8], n: usize) -> Result<()> {
    if pred.len() != n {
        return Err(FabError::Contract(format!(
            "{} predictions for {n} samples",
            pred.len()
        )));
    }
    Ok(())
}

pub fn confusion(pred: &[i8], ds: &Dataset) -> Result<GroupConfusion> {
    check_len(pred, ds.len())?;
    let mut out = GroupConfusion::default();
    for (s, &p) in ds.samples().iter().zip(pred) {
        let cell = if s.is_favored() {
            &mut out.favored
        } else {
            &mut out.unfavored
        };
        match (s.label == 1, p == 1) {
            (true, true) => cell.true_pos += 1,
            (true, false) => cell.false_neg += 1,
            (false, true) => cell.false_pos += 1,
            (false, false) => cell.true_neg += 1,
        }
    }
    Ok(out)
}

/// Unfavored minus favored error rate for the indicator, in `[-1, 1]`.
pub fn signed_gap(pred: &[i8], ds: &Dataset, ind: FairnessIndicator) -> Result<f64> {
    confusion(pred, ds)?.signed_gap(ind)
}

/// `|signed_gap|`, in `[0, 1]`.
pub fn fairness_loss(pred: &[i8], ds: &Dataset, ind: FairnessIndicator) -> Result<f64> {
    signed_gap(pred, ds, ind).map(f64::abs)
}

pub fn accuracy(pred: &[i8], labels: &[i8]) -> Result<f64> {
    check_len(pred, labels.len())?;
    if labels.is_empty() {
        return Err(FabError::Contract("accuracy of an empty set".into()));
    }
    let correct = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / labels.len() as f64)
}

pub fn error_rate(pred: &[i8], labels: &[i8]) -> Result<f64> {
    check_len(pred, labels.len())?;
    if labels.is_empty() {
        return Err(FabError::Contract("error rate of an empty set".into()));
    }
    let wrong = pred.iter().zip(labels).filter(|(p, y)| p != y).count();
    Ok(wrong as f64 / labels.len() as f64)
}
