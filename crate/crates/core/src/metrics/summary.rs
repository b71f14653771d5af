use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Two-sided 95% Student-t critical value for four degrees of freedom.
pub const CI_T_CRITICAL_N5: f64 = 2.776;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n − 1); absent for a single value.
    pub sd: Option<f64>,
    pub variance: Option<f64>,
    /// 2.776·SD; only defined for five runs.
    pub ci_halfwidth: Option<f64>,
}

/// Summary of exactly five per-seed values with the n = 5 confidence bar.
pub fn seed_summary(values: &[f64]) -> Result<SeedSummary, MetricsError> {
    if values.len() != 5 {
        return Err(MetricsError::WrongSeedCount(values.len()));
    }
    summarize(values)
}

/// Summary of any number of runs. The confidence bar is only reported when
/// there are five.
pub fn summarize(values: &[f64]) -> Result<SeedSummary, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance =
        (values.len() > 1).then(|| values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0));
    let sd = variance.map(f64::sqrt);
    let ci_halfwidth = if values.len() == 5 { sd.map(|s| CI_T_CRITICAL_N5 * s) } else { None };
    Ok(SeedSummary { values: values.to_vec(), mean, sd, variance, ci_halfwidth })
}
