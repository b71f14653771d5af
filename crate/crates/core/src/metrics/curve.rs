use serde::{Deserialize, Serialize};

use super::{check_lengths, check_scores, ConfusionCounts, MetricsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    /// Position in the sweep, strictest threshold first.
    pub index: usize,
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Distinct scores in descending order, with the confusion counts obtained
/// by predicting positive for every score ≥ that threshold.
fn sweep(scores: &[f64], labels: &[bool]) -> Vec<(f64, ConfusionCounts)> {
    let n_pos = labels.iter().filter(|&&l| l).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut out = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((t, ConfusionCounts { tp, fp, fn_: n_pos - tp, tn: n_neg - fp }));
    }
    out
}

/// One point per distinct score, strictest threshold first. Tied scores
/// cross the threshold together.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>, MetricsError> {
    check_lengths(scores, labels)?;
    check_scores(scores)?;
    if !labels.iter().any(|&l| l) {
        return Err(MetricsError::NoPositives);
    }
    Ok(sweep(scores, labels)
        .into_iter()
        .enumerate()
        .map(|(index, (threshold, c))| PrPoint {
            index,
            threshold,
            // At least one sample sits at or above every distinct threshold.
            precision: c.precision().expect("non-empty prediction set"),
            recall: c.recall().expect("positives exist"),
        })
        .collect())
}

/// Σ (R_n − R_{n−1})·P_n with R_0 = 0, over points in ascending recall.
pub fn average_precision(points: &[PrPoint]) -> Result<f64, MetricsError> {
    if points.is_empty() {
        return Err(MetricsError::EmptyCurve);
    }
    let mut prev = 0.0;
    let mut ap = 0.0;
    for p in points {
        ap += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    Ok(ap)
}

/// Precision of several curves resampled onto a common recall grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolatedPr {
    pub recall: Vec<f64>,
    /// Per-curve interpolated precision, one row per input curve.
    pub per_curve: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Sample standard deviation across curves; absent for a single curve.
    pub sd: Option<Vec<f64>>,
}

/// Linear interpolation of `(recall, precision)` knots at `r`.
///
/// Knots sharing a recall collapse to their highest precision. Below the
/// first knot the first precision is used; past the last knot, the last.
fn interpolate_at(knots: &[(f64, f64)], r: f64) -> f64 {
    let first = knots[0];
    if r <= first.0 {
        return first.1;
    }
    for w in knots.windows(2) {
        let ((r0, p0), (r1, p1)) = (w[0], w[1]);
        if r <= r1 {
            if r == r1 {
                return p1;
            }
            return p0 + (p1 - p0) * (r - r0) / (r1 - r0);
        }
    }
    knots[knots.len() - 1].1
}

fn knots(curve: &[PrPoint]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.recall, p.precision)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    pts.dedup_by(|later, kept| later.0 == kept.0);
    pts
}

/// Resamples every curve onto `grid_points` evenly spaced recalls in [0, 1]
/// (101 gives the 0.00, 0.01, …, 1.00 axis) and aggregates across curves.
pub fn interpolate_pr(curves: &[Vec<PrPoint>], grid_points: usize) -> Result<InterpolatedPr, MetricsError> {
    if curves.is_empty() || grid_points < 2 {
        return Err(MetricsError::EmptyCurve);
    }
    if curves.iter().any(|c| c.is_empty()) {
        return Err(MetricsError::EmptyCurve);
    }
    let recall: Vec<f64> = (0..grid_points).map(|i| i as f64 / (grid_points - 1) as f64).collect();
    let per_curve: Vec<Vec<f64>> = curves
        .iter()
        .map(|c| {
            let k = knots(c);
            recall.iter().map(|&r| interpolate_at(&k, r)).collect()
        })
        .collect();
    let n = per_curve.len() as f64;
    let mean: Vec<f64> = (0..grid_points).map(|j| per_curve.iter().map(|c| c[j]).sum::<f64>() / n).collect();
    let sd = (per_curve.len() > 1).then(|| {
        (0..grid_points)
            .map(|j| {
                let ss: f64 = per_curve.iter().map(|c| (c[j] - mean[j]).powi(2)).sum();
                (ss / (n - 1.0)).sqrt()
            })
            .collect()
    });
    Ok(InterpolatedPr { recall, per_curve, mean, sd })
}

/// Largest recall at which the piecewise-linear curve through
/// `(recall[i], precision[i])` still has precision ≥ `target`.
pub fn recall_at_precision(recall: &[f64], precision: &[f64], target: f64) -> Option<f64> {
    let last = precision.len().checked_sub(1)?;
    let i = (0..=last).rev().find(|&i| precision[i] >= target)?;
    if i == last {
        return Some(recall[last]);
    }
    let (p0, p1) = (precision[i], precision[i + 1]);
    let (r0, r1) = (recall[i], recall[i + 1]);
    Some(r0 + (p0 - target) / (p0 - p1) * (r1 - r0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum OperatingTarget {
    /// Loosest threshold whose precision is at least this value.
    MinPrecision(f64),
    /// Strictest threshold whose false-negative rate is at most this value.
    MaxFnr(f64),
}

impl std::fmt::Display for OperatingTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OperatingTarget::MinPrecision(p) => write!(f, "precision >= {p}"),
            OperatingTarget::MaxFnr(r) => write!(f, "false-negative rate <= {r}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub target: OperatingTarget,
    /// Scores ≥ threshold are flagged for review.
    pub threshold: f64,
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub false_negative_rate: f64,
    /// Share of negatives that fall below the threshold and need no review.
    pub negatives_excluded: Option<f64>,
}

pub fn select_operating_point(
    scores: &[f64],
    labels: &[bool],
    target: OperatingTarget,
) -> Result<OperatingPoint, MetricsError> {
    check_lengths(scores, labels)?;
    check_scores(scores)?;
    if !labels.iter().any(|&l| l) {
        return Err(MetricsError::NoPositives);
    }
    let sweep = sweep(scores, labels);
    let chosen = match target {
        OperatingTarget::MinPrecision(p) => {
            sweep.iter().rev().find(|(_, c)| c.precision().is_some_and(|x| x >= p))
        }
        OperatingTarget::MaxFnr(f) => {
            sweep.iter().find(|(_, c)| c.false_negative_rate().is_some_and(|x| x <= f))
        }
    };
    let &(threshold, counts) = chosen.ok_or_else(|| MetricsError::Unattainable(target.to_string()))?;
    Ok(OperatingPoint {
        target,
        threshold,
        counts,
        precision: counts.precision().expect("non-empty prediction set"),
        recall: counts.recall().expect("positives exist"),
        false_negative_rate: counts.false_negative_rate().expect("positives exist"),
        negatives_excluded: {
            let neg = counts.tn + counts.fp;
            (neg > 0).then(|| counts.tn as f64 / neg as f64)
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pr(points: &[(f64, f64)]) -> Vec<PrPoint> {
        points
            .iter()
            .enumerate()
            .map(|(index, &(precision, recall))| PrPoint { index, threshold: 0.0, precision, recall })
            .collect()
    }

    #[test]
    fn three_point_sweep() {
        let c = pr_curve(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap();
        let got: Vec<(f64, f64)> = c.iter().map(|p| (p.precision, p.recall)).collect();
        assert_eq!(got, vec![(1.0, 0.5), (0.5, 0.5), (2.0 / 3.0, 1.0)]);
        let ap = average_precision(&c).unwrap();
        assert!((ap - (0.5 + 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn separating_and_all_positive_curves() {
        let c = pr_curve(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert!(c.iter().any(|p| p.precision == 1.0 && p.recall == 1.0));
        assert_eq!(average_precision(&c).unwrap(), 1.0);

        let c = pr_curve(&[0.3, 0.1, 0.5], &[true, true, true]).unwrap();
        assert!(c.iter().all(|p| p.precision == 1.0));
        assert_eq!(pr_curve(&[0.1], &[false]), Err(MetricsError::NoPositives));
    }

    #[test]
    fn ties_share_a_threshold() {
        let c = pr_curve(&[0.5, 0.5, 0.5], &[true, false, false]).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].precision - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ap_single_point() {
        assert_eq!(average_precision(&pr(&[(0.4, 1.0)])).unwrap(), 0.4);
        assert_eq!(average_precision(&[]), Err(MetricsError::EmptyCurve));
    }

    #[test]
    fn interpolation_between_knots() {
        let curve = pr(&[(1.0, 0.0), (0.5, 1.0)]);
        let ip = interpolate_pr(&[curve], 5).unwrap();
        assert_eq!(ip.recall, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(ip.mean, vec![1.0, 0.875, 0.75, 0.625, 0.5]);
        assert!(ip.sd.is_none());
    }

    #[test]
    fn identical_curves_have_zero_spread() {
        let curve = pr_curve(&[0.9, 0.6, 0.4, 0.2], &[true, false, true, false]).unwrap();
        let ip = interpolate_pr(&[curve.clone(), curve.clone(), curve], 101).unwrap();
        assert!(ip.sd.unwrap().iter().all(|&s| s < 1e-15));
    }

    #[test]
    fn interpolation_reproduces_knots() {
        // Recall knots at multiples of 0.25 land exactly on a 101-point grid.
        let curve = pr(&[(1.0, 0.25), (0.8, 0.5), (0.6, 0.75), (0.55, 1.0)]);
        let ip = interpolate_pr(std::slice::from_ref(&curve), 101).unwrap();
        for p in &curve {
            let j = (p.recall * 100.0).round() as usize;
            assert_eq!(ip.mean[j], p.precision);
        }
        // Below the first knot the first precision is used.
        assert_eq!(ip.mean[0], 1.0);
    }

    #[test]
    fn short_curve_is_extended() {
        let ip = interpolate_pr(&[pr(&[(1.0, 0.2), (0.7, 0.6)])], 11).unwrap();
        assert_eq!(ip.mean[10], 0.7);
    }

    #[test]
    fn recall_at_precision_crossing() {
        let r = [0.0, 0.5, 1.0];
        assert!((recall_at_precision(&r, &[1.0, 0.9, 0.7], 0.8).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(recall_at_precision(&r, &[1.0, 0.9, 0.85], 0.8), Some(1.0));
        assert_eq!(recall_at_precision(&r, &[0.5, 0.4, 0.3], 0.8), None);
    }

    #[test]
    fn operating_point_examples() {
        let op = select_operating_point(&[0.9, 0.8, 0.7], &[true, false, true], OperatingTarget::MinPrecision(0.8))
            .unwrap();
        assert_eq!(op.threshold, 0.9);
        assert_eq!(op.recall, 0.5);

        let op = select_operating_point(
            &[0.9, 0.8, 0.3, 0.1],
            &[true, true, false, false],
            OperatingTarget::MinPrecision(0.8),
        )
        .unwrap();
        assert_eq!(op.recall, 1.0);
        assert_eq!(op.negatives_excluded, Some(1.0));

        let flat = select_operating_point(&[0.5; 4], &[true, false, false, false], OperatingTarget::MinPrecision(0.5));
        assert!(matches!(flat, Err(MetricsError::Unattainable(_))));
    }

    #[test]
    fn fnr_target_keeps_threshold_strict() {
        let scores = [0.95, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3];
        let labels = [true, true, false, true, false, true, false, false];
        let op = select_operating_point(&scores, &labels, OperatingTarget::MaxFnr(0.25)).unwrap();
        // Three of four positives are found first at 0.7.
        assert_eq!(op.threshold, 0.7);
        assert_eq!(op.false_negative_rate, 0.25);
        assert_eq!(op.negatives_excluded, Some(0.75));
        let op = select_operating_point(&scores, &labels, OperatingTarget::MaxFnr(0.0)).unwrap();
        assert_eq!(op.threshold, 0.5);
    }
}
