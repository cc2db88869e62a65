//! Cross-score summaries.

use alloc::vec::Vec;

use super::percentile_interval;
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub iqm: f64,
}

pub fn median(values: &[f64]) -> f64 {
    stats::quantile_sorted(&stats::sorted(values), 0.5)
}

/// Mean of the values lying between the interpolated quartiles, inclusive.
pub fn iqm(values: &[f64]) -> f64 {
    let s = stats::sorted(values);
    let q1 = stats::quantile_sorted(&s, 0.25);
    let q3 = stats::quantile_sorted(&s, 0.75);
    let inner: Vec<f64> = s.iter().copied().filter(|&v| v >= q1 && v <= q3).collect();
    if inner.is_empty() {
        // only possible through rounding in the interpolation
        return stats::quantile_sorted(&s, 0.5);
    }
    stats::mean(&inner)
}

/// Mean, median and IQM of per-score values. Panics on an empty slice.
pub fn aggregate(values: &[f64]) -> Summary {
    assert!(!values.is_empty(), "aggregate of no scores");
    Summary { mean: stats::mean(values), median: median(values), iqm: iqm(values) }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AggregateSummary {
    pub summary: Summary,
    pub mean_ci: Option<(f64, f64)>,
    pub median_ci: Option<(f64, f64)>,
    pub iqm_ci: Option<(f64, f64)>,
}

/// Aggregates with intervals from replicate-wise summaries: replicate `b`
/// of the aggregate uses replicate `b` of every score. Scores without
/// replicates (or with too few) disable the intervals.
pub fn aggregate_with_ci(values: &[f64], replicates: &[&[f64]], level: f64) -> AggregateSummary {
    let summary = aggregate(values);
    let b = replicates.iter().map(|r| r.len()).min().unwrap_or(0);
    if b == 0 || replicates.len() != values.len() {
        return AggregateSummary { summary, mean_ci: None, median_ci: None, iqm_ci: None };
    }
    let mut means = Vec::with_capacity(b);
    let mut medians = Vec::with_capacity(b);
    let mut iqms = Vec::with_capacity(b);
    let mut row = Vec::with_capacity(values.len());
    for i in 0..b {
        row.clear();
        row.extend(replicates.iter().map(|r| r[i]));
        let s = aggregate(&row);
        means.push(s.mean);
        medians.push(s.median);
        iqms.push(s.iqm);
    }
    AggregateSummary {
        summary,
        mean_ci: Some(percentile_interval(&means, level, summary.mean)),
        median_ci: Some(percentile_interval(&medians, level, summary.median)),
        iqm_ci: Some(percentile_interval(&iqms, level, summary.iqm)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let v: Vec<f64> = (1..=8).map(f64::from).collect();
        assert_eq!(iqm(&v), 4.5);
        let s = aggregate(&[0.0, 0.0, 0.0, 100.0]);
        assert_eq!((s.mean, s.median), (25.0, 0.0));
        let one = aggregate(&[0.37]);
        assert_eq!((one.mean, one.median, one.iqm), (0.37, 0.37, 0.37));
    }

    #[test]
    fn replicate_intervals() {
        let r1 = [0.1, 0.2, 0.3];
        let r2 = [0.5, 0.6, 0.7];
        let a = aggregate_with_ci(&[0.2, 0.6], &[&r1, &r2], 0.9);
        let (lo, hi) = a.mean_ci.unwrap();
        assert!(lo <= a.summary.mean && a.summary.mean <= hi);
        assert!(aggregate_with_ci(&[0.2], &[], 0.9).mean_ci.is_none());
    }
}
