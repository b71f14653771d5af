//! Evaluation: confusion-based scores, precision-recall curves, ranking
//! precision, rater agreement, multi-seed summaries and operating points.
//!
//! A metric whose denominator is zero is `None`, never NaN.

mod agreement;
mod baseline;
mod curve;
mod ranking;
mod summary;

pub use agreement::cohens_kappa;
pub use baseline::{expected_random_baseline, simulate_random_predictor, BaselineMetrics};
pub use curve::{
    average_precision, interpolate_pr, pr_curve, recall_at_precision, select_operating_point, InterpolatedPr,
    OperatingPoint, OperatingTarget, PrPoint,
};
pub use ranking::{rank_order, top_n_count, top_n_precision};
pub use summary::{seed_summary, summarize, SeedSummary, CI_T_CRITICAL_N5};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no samples")]
    Empty,
    #[error("no positive labels")]
    NoPositives,
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
    #[error("expected exactly 5 seed values, got {0}")]
    WrongSeedCount(usize),
    #[error("fraction {0} outside (0, 1]")]
    BadFraction(f64),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("empty precision-recall curve")]
    EmptyCurve,
    #[error("operating target {0} is unattainable")]
    Unattainable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// TP / (TP + 0.5·(FP + FN)).
    pub fn f1(&self) -> Option<f64> {
        let denom = self.tp as f64 + 0.5 * (self.fp + self.fn_) as f64;
        ratio(self.tp as f64, denom)
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp as f64, (self.tp + self.fp) as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp as f64, (self.tp + self.fn_) as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio((self.tp + self.tn) as f64, self.total() as f64)
    }

    /// FN / (TP + FN).
    pub fn false_negative_rate(&self) -> Option<f64> {
        ratio(self.fn_ as f64, (self.tp + self.fn_) as f64)
    }
}

fn ratio(num: f64, denom: f64) -> Option<f64> {
    (denom > 0.0).then(|| num / denom)
}

pub(crate) fn check_lengths<A, B>(a: &[A], b: &[B]) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

pub(crate) fn check_scores(scores: &[f64]) -> Result<(), MetricsError> {
    match scores.iter().position(|s| !s.is_finite()) {
        Some(i) => Err(MetricsError::NonFiniteScore(i)),
        None => Ok(()),
    }
}

pub fn confusion(verdicts: &[bool], labels: &[bool]) -> Result<ConfusionCounts, MetricsError> {
    check_lengths(verdicts, labels)?;
    let mut c = ConfusionCounts::default();
    for (&v, &l) in verdicts.iter().zip(labels) {
        match (v, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Formats a possibly undefined metric the way result tables print it.
pub fn fmt_metric(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(x) => format!("{x:.decimals$}"),
        None => "-".to_owned(),
    }
}
