//! Balancing, train/test splitting and the admissible lambda range.
//!
//! All randomness comes from [`rng`], a PCG64 (`Lcg128Xsl64`) generator
//! seeded from a `u64`; its output stream is fixed by the `rand_pcg` crate
//! and identical across platforms.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample};
use crate::error::{FabError, Result};

/// Which group-conditional error rate the fairness term compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessIndicator {
    /// Overall error rate per group.
    Accuracy,
    /// Error rate among `y = -1`.
    Fpr,
    /// Error rate among `y = +1`.
    Fnr,
}

impl FairnessIndicator {
    pub const ALL: [FairnessIndicator; 3] = [Self::Accuracy, Self::Fpr, Self::Fnr];

    /// Whether a sample belongs to the subpopulation the indicator measures.
    #[inline]
    pub fn covers(self, label: i8) -> bool {
        match self {
            FairnessIndicator::Accuracy => true,
            FairnessIndicator::Fpr => label == -1,
            FairnessIndicator::Fnr => label == 1,
        }
    }

    #[inline]
    pub fn covers_sample(self, s: &Sample) -> bool {
        self.covers(s.label)
    }
}

impl fmt::Display for FairnessIndicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FairnessIndicator::Accuracy => "accuracy",
            FairnessIndicator::Fpr => "fpr",
            FairnessIndicator::Fnr => "fnr",
        })
    }
}

/// Admissible lambda interval `[lo, hi]`; `lo` is always zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaRange {
    pub lo: f64,
    pub hi: f64,
}

impl LambdaRange {
    /// Slack for lambdas that equal `hi` up to rounding.
    pub const TOLERANCE: f64 = 1e-12;

    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lo && lambda <= self.hi + Self::TOLERANCE
    }

    pub fn check(&self, lambda: f64) -> Result<()> {
        if lambda.is_finite() && self.contains(lambda) {
            Ok(())
        } else {
            Err(FabError::LambdaOutOfRange {
                lambda,
                max: self.hi,
            })
        }
    }
}

pub fn rng(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}

/// Undersample so both sensitive groups (and, optionally, all four
/// group/label cells) have equal size.
///
/// Retained samples keep their original relative order.
pub fn balance_by_group(ds: &Dataset, also_balance_labels: bool, seed: u64) -> Result<Dataset> {
    let mut cells: Vec<Vec<usize>> = if also_balance_labels {
        vec![Vec::new(); 4]
    } else {
        vec![Vec::new(); 2]
    };
    for (i, s) in ds.samples().iter().enumerate() {
        let group = usize::from(s.sensitive);
        let cell = if also_balance_labels {
            group * 2 + usize::from(s.label == 1)
        } else {
            group
        };
        cells[cell].push(i);
    }
    if let Some(empty) = cells.iter().position(Vec::is_empty) {
        return Err(FabError::BalanceInfeasible(format!("cell {empty} is empty")));
    }
    let target = cells.iter().map(Vec::len).min().unwrap();
    let mut rng = rng(seed);
    let mut keep = Vec::with_capacity(target * cells.len());
    for cell in &mut cells {
        if cell.len() > target {
            cell.shuffle(&mut rng);
            cell.truncate(target);
        }
        keep.extend_from_slice(cell);
    }
    keep.sort_unstable();
    ds.subset(&keep)
}

/// Seeded shuffle followed by a prefix/suffix split with
/// `floor(train_fraction * N)` training samples.
pub fn split_train_test(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(FabError::Contract(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let n = ds.len();
    if n < 2 {
        return Err(FabError::Contract("need at least two samples to split".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed));
    let n_train = (train_fraction * n as f64).floor() as usize;
    let (train, test) = order.split_at(n_train);
    let part = |idx: &[usize], side: &str| {
        ds.subset(idx).map_err(|e| match e {
            FabError::InvalidDataset(_) | FabError::EmptyDataset => {
                FabError::ResampleNeeded(format!("{side} partition lacks a sensitive group"))
            }
            other => other,
        })
    };
    Ok((part(train, "train")?, part(test, "test")?))
}

/// Largest lambda keeping every initial weight non-negative.
///
/// `hi` is the fraction of samples that are favored and in the indicator's
/// subpopulation. Both the favored and unfavored subpopulations must be
/// non-empty since they are denominators of the initial weights.
pub fn lambda_max(ds: &Dataset, ind: FairnessIndicator) -> Result<LambdaRange> {
    let (unfavored, favored) = subpopulation_counts(ds, ind);
    if favored == 0 || unfavored == 0 {
        return Err(FabError::DegenerateRange(format!(
            "{ind}: subpopulation sizes are {unfavored} (S=0) and {favored} (S=1)"
        )));
    }
    Ok(LambdaRange {
        lo: 0.0,
        hi: favored as f64 / ds.len() as f64,
    })
}

/// `(count(S=0), count(S=1))` restricted to the indicator's subpopulation.
pub fn subpopulation_counts(ds: &Dataset, ind: FairnessIndicator) -> (usize, usize) {
    ds.samples()
        .iter()
        .filter(|s| ind.covers_sample(s))
        .fold((0, 0), |(u, f), s| {
            if s.is_favored() {
                (u, f + 1)
            } else {
                (u + 1, f)
            }
        })
}

/// SplitMix64 finalizer used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
