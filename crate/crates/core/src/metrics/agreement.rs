use super::{check_lengths, MetricsError};

/// Cohen's kappa for two binary raters: (p_o − p_e) / (1 − p_e).
///
/// When chance agreement is certain (both raters constant) the statistic is
/// undefined unless the raters also agree everywhere, in which case it is 1.
pub fn cohens_kappa(a: &[bool], b: &[bool]) -> Result<Option<f64>, MetricsError> {
    check_lengths(a, b)?;
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let a_pos = a.iter().filter(|&&x| x).count() as f64 / n;
    let b_pos = b.iter().filter(|&&x| x).count() as f64 / n;
    let p_o = agree / n;
    let p_e = a_pos * b_pos + (1.0 - a_pos) * (1.0 - b_pos);
    if p_e == 1.0 {
        return Ok((p_o == 1.0).then_some(1.0));
    }
    Ok(Some((p_o - p_e) / (1.0 - p_e)))
}
