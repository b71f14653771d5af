use super::{forward, loss, loss_and_gradient, GgnnError, GgnnInput, GgnnParams};

pub const FD_STEP: f64 = 1e-4;

/// Denominator floor for the relative error, so that components whose true
/// gradient is ~0 are judged on absolute error instead.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// (tensor index, element index) of the worst component.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Max relative error between the analytic gradient and central finite
/// differences over every parameter.
pub fn grad_check(p: &GgnnParams, input: &GgnnInput, label: bool) -> Result<f64, GgnnError> {
    grad_check_with(p, input, label, |_| {}).map(|r| r.max_relative_error)
}

/// Like [`grad_check`], applying `tamper` to the analytic gradient first.
pub fn grad_check_with(
    p: &GgnnParams,
    input: &GgnnInput,
    label: bool,
    tamper: impl Fn(&mut GgnnParams),
) -> Result<GradCheckReport, GgnnError> {
    let weight = 1.0;
    let (_, mut analytic) = loss_and_gradient(p, input, label, weight)?;
    tamper(&mut analytic);
    let analytic_flat: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.to_vec()).collect();

    let mut probe = p.clone();
    let eval = |q: &GgnnParams| forward(q, input).map(|f| loss(f.logits, label, weight));
    let mut report = GradCheckReport { max_relative_error: 0.0, worst: (0, 0), analytic: 0.0, numeric: 0.0, checked: 0 };
    for (t, grads) in analytic_flat.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let original = probe.tensors()[t][i];
            probe.tensors_mut()[t][i] = original + FD_STEP;
            let up = eval(&probe)?;
            probe.tensors_mut()[t][i] = original - FD_STEP;
            let down = eval(&probe)?;
            probe.tensors_mut()[t][i] = original;
            let numeric = (up - down) / (2.0 * FD_STEP);
            if !(a.is_finite() && numeric.is_finite()) {
                return Err(GgnnError::NonFinite);
            }
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            report.checked += 1;
            if rel > report.max_relative_error {
                report = GradCheckReport { max_relative_error: rel, worst: (t, i), analytic: a, numeric, ..report };
            }
        }
    }
    Ok(report)
}
