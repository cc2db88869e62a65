//! Divergence of `x` conditional on buckets of a second score `y`.

use alloc::vec::Vec;

use super::{evaluate, percentile_interval, BootstrapConfig, DivergenceError, DivergenceResult, Metric};
use crate::stats;
use crate::math;

/// How conditioning values are bucketed.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BucketSpec {
    /// Pooled deciles.
    Deciles,
    /// `n` pooled quantile buckets.
    Quantiles(usize),
    /// Unit-width buckets `[h, h+1)` over `0..24`.
    Hourly,
    /// Explicit ascending edges; values outside fall into the end buckets.
    Edges(Vec<f64>),
}

/// Buckets with fewer values than this on either side score zero.
pub const MIN_BUCKET_VALUES: usize = 2;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BucketResult {
    pub low: f64,
    pub high: f64,
    pub weight: f64,
    pub n_real: usize,
    pub n_gen: usize,
    pub value: f64,
    /// `None` for insufficient buckets.
    pub result: Option<DivergenceResult>,
    pub insufficient: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionalResult {
    pub metric: Metric,
    pub edges: Vec<f64>,
    pub buckets: Vec<BucketResult>,
    pub total: f64,
    pub ci: Option<(f64, f64)>,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub replicates: Vec<f64>,
}

impl ConditionalResult {
    pub fn flagged(&self) -> usize {
        self.buckets.iter().filter(|b| b.insufficient).count()
    }
}

/// `Σ w_j v_j`.
pub fn weighted_total(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

fn dedup_edges(mut edges: Vec<f64>) -> Vec<f64> {
    edges.dedup();
    if edges.len() < 2 {
        let v = edges.first().copied().unwrap_or(0.0);
        return alloc::vec![v - 0.5, v + 0.5];
    }
    edges
}

/// Bucket boundaries for the pooled conditioning sample.
pub fn bucket_edges(y_real: &[f64], y_gen: &[f64], spec: &BucketSpec) -> Result<Vec<f64>, DivergenceError> {
    let quantile_edges = |n: usize| -> Result<Vec<f64>, DivergenceError> {
        if n == 0 {
            return Err(DivergenceError::InvalidEdges);
        }
        let mut pooled: Vec<f64> = y_real.iter().chain(y_gen).copied().collect();
        if pooled.is_empty() {
            return Err(DivergenceError::EmptySample("conditioning"));
        }
        stats::sort_floats(&mut pooled);
        let e = (0..=n).map(|k| stats::quantile_sorted(&pooled, k as f64 / n as f64)).collect();
        Ok(dedup_edges(e))
    };
    match spec {
        BucketSpec::Deciles => quantile_edges(10),
        BucketSpec::Quantiles(n) => quantile_edges(*n),
        BucketSpec::Hourly => Ok((0..=24).map(f64::from).collect()),
        BucketSpec::Edges(e) => {
            super::check_edges(e)?;
            Ok(e.clone())
        }
    }
}

fn bucket_index(edges: &[f64], v: f64) -> usize {
    let nb = edges.len() - 1;
    let k = edges.partition_point(|&e| e <= v);
    (k.max(1) - 1).min(nb - 1)
}

fn split(x: &[f64], y: &[f64], edges: &[f64], hourly: bool) -> Vec<Vec<f64>> {
    let mut cells = alloc::vec![Vec::new(); edges.len() - 1];
    for (&xv, &yv) in x.iter().zip(y) {
        let yv = if hourly { math::floor(yv) - 24.0 * math::floor(yv / 24.0) } else { yv };
        cells[bucket_index(edges, yv)].push(xv);
    }
    cells
}

/// Divergence of `x` within each bucket of `y`, weighted by the average
/// real/generated bucket probability.
///
/// With a bootstrap config, each bucket is resampled independently (from
/// its own derived stream) with weights held fixed; the total's interval
/// comes from the weighted replicate sums.
pub fn conditional_divergence(
    x_real: &[f64],
    x_gen: &[f64],
    y_real: &[f64],
    y_gen: &[f64],
    metric: Metric,
    spec: &BucketSpec,
    bootstrap: Option<&BootstrapConfig>,
) -> Result<ConditionalResult, DivergenceError> {
    if x_real.len() != y_real.len() {
        return Err(DivergenceError::Misaligned { dataset: "real", x: x_real.len(), y: y_real.len() });
    }
    if x_gen.len() != y_gen.len() {
        return Err(DivergenceError::Misaligned { dataset: "generated", x: x_gen.len(), y: y_gen.len() });
    }
    super::non_empty(x_real, x_gen)?;
    let edges = bucket_edges(y_real, y_gen, spec)?;
    let hourly = matches!(spec, BucketSpec::Hourly);
    let cells_r = split(x_real, y_real, &edges, hourly);
    let cells_g = split(x_gen, y_gen, &edges, hourly);
    let (nr, ng) = (x_real.len() as f64, x_gen.len() as f64);

    let mut buckets = Vec::new();
    for j in 0..edges.len() - 1 {
        let (cr, cg) = (&cells_r[j], &cells_g[j]);
        if cr.is_empty() && cg.is_empty() {
            continue;
        }
        let weight = 0.5 * (cr.len() as f64 / nr + cg.len() as f64 / ng);
        let insufficient = cr.len() < MIN_BUCKET_VALUES || cg.len() < MIN_BUCKET_VALUES;
        let result = if insufficient {
            None
        } else {
            let boot = bootstrap.map(|b| BootstrapConfig {
                seed: stats::derive_seed(b.seed, &alloc::format!("bucket{j}")),
                ..*b
            });
            Some(evaluate(cr, cg, &[metric], boot.as_ref())?.remove(0))
        };
        buckets.push(BucketResult {
            low: edges[j],
            high: edges[j + 1],
            weight,
            n_real: cr.len(),
            n_gen: cg.len(),
            value: result.as_ref().map_or(0.0, |r| r.value),
            result,
            insufficient,
        });
    }
    let weights: Vec<f64> = buckets.iter().map(|b| b.weight).collect();
    let values: Vec<f64> = buckets.iter().map(|b| b.value).collect();
    let total = weighted_total(&weights, &values);

    let (ci, replicates) = match bootstrap {
        Some(cfg) => {
            let reps: Vec<f64> = (0..cfg.replicates)
                .map(|i| {
                    buckets
                        .iter()
                        .map(|b| b.weight * b.result.as_ref().map_or(0.0, |r| r.replicates[i]))
                        .sum()
                })
                .collect();
            (Some(percentile_interval(&reps, cfg.level, total)), reps)
        }
        None => (None, Vec::new()),
    };
    Ok(ConditionalResult { metric, edges, buckets, total, ci, replicates })
}
