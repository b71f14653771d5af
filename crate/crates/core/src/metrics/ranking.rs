use super::{check_lengths, check_scores, MetricsError};

/// Sample indices by descending score; equal scores keep ascending index.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// ⌈fraction·n⌉, at least 1 and at most n.
pub fn top_n_count(n: usize, fraction: f64) -> Result<usize, MetricsError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(MetricsError::BadFraction(fraction));
    }
    // Guard against 0.07 * 100 = 7.000000000000001 rounding up to 8.
    let k = ((fraction * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(k.min(n))
}

/// Share of positives among the ⌈fraction·n⌉ highest-scoring samples.
pub fn top_n_precision(scores: &[f64], labels: &[bool], fraction: f64) -> Result<f64, MetricsError> {
    check_lengths(scores, labels)?;
    check_scores(scores)?;
    let k = top_n_count(scores.len(), fraction)?;
    let hits = rank_order(scores).into_iter().take(k).filter(|&i| labels[i]).count();
    Ok(hits as f64 / k as f64)
}
