use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{confusion, MetricsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineMetrics {
    pub p_vuln: f64,
    pub f1: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
}

/// Metrics computed from the expected confusion counts of a predictor that
/// flags each report independently with probability `p_vuln`.
pub fn expected_random_baseline(p_vuln: f64, n_pos: u64, n_neg: u64) -> Result<BaselineMetrics, MetricsError> {
    if !(0.0..=1.0).contains(&p_vuln) {
        return Err(MetricsError::BadProbability(p_vuln));
    }
    let (pos, neg) = (n_pos as f64, n_neg as f64);
    let total = pos + neg;
    let tp = p_vuln * pos;
    let fp = p_vuln * neg;
    let fn_ = (1.0 - p_vuln) * pos;
    let tn = (1.0 - p_vuln) * neg;
    let f1_denom = tp + 0.5 * (fp + fn_);
    Ok(BaselineMetrics {
        p_vuln,
        f1: (f1_denom > 0.0).then(|| tp / f1_denom),
        precision: (p_vuln > 0.0 && total > 0.0).then(|| pos / total),
        recall: (pos > 0.0).then_some(p_vuln),
        accuracy: (total > 0.0).then(|| (tp + tn) / total),
    })
}

/// Mean per-trial F1 of a seeded Bernoulli(`p_vuln`) predictor. Trials with
/// an undefined F1 are skipped; returns `None` if all were.
pub fn simulate_random_predictor(p_vuln: f64, n_pos: u64, n_neg: u64, trials: usize, seed: u64) -> Option<f64> {
    let labels: Vec<bool> =
        std::iter::repeat_n(true, n_pos as usize).chain(std::iter::repeat_n(false, n_neg as usize)).collect();
    if labels.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut verdicts = vec![false; labels.len()];
    let (mut sum, mut defined) = (0.0, 0usize);
    for _ in 0..trials {
        for v in verdicts.iter_mut() {
            *v = rng.random_bool(p_vuln);
        }
        if let Some(f1) = confusion(&verdicts, &labels).ok().and_then(|c| c.f1()) {
            sum += f1;
            defined += 1;
        }
    }
    (defined > 0).then(|| sum / defined as f64)
}
