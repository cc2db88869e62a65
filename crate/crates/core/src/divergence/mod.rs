//! Distributional distances between real and generated score samples.
//!
//! Two metrics are supported: total variation (L1) over Freedman-Diaconis
//! histograms of the pooled sample, and Wasserstein-1 after pooled
//! mean-variance normalisation. On top of those sit conditional
//! (bucket-weighted) divergences, horizon curves, the real-vs-real
//! significance threshold, percentile bootstrap intervals and
//! mean/median/IQM aggregation.

mod aggregate;
mod conditional;
mod horizon;
pub(crate) mod support;

use alloc::vec::Vec;

use rand::Rng as _;
use thiserror::Error;

use crate::stats::{self, Rng};
use support::{PairedSupport, Resampler};

pub use aggregate::{aggregate, aggregate_with_ci, iqm, median, AggregateSummary, Summary};
pub use conditional::{
    bucket_edges, conditional_divergence, weighted_total, BucketResult, BucketSpec,
    ConditionalResult,
};
pub use horizon::{default_intervals, horizon_divergence, HorizonPoint};
pub use support::MAX_BINS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DivergenceError {
    #[error("empty {0} sample")]
    EmptySample(&'static str),
    #[error("need at least {need} values, got {got}")]
    TooFewValues { need: usize, got: usize },
    #[error("bin edges must be at least two strictly increasing finite values")]
    InvalidEdges,
    #[error("bootstrap needs at least 100 replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("confidence level {0} outside (0, 1)")]
    InvalidLevel(f64),
    #[error("misaligned series: {x} scores vs {y} conditioning values ({dataset})")]
    Misaligned { dataset: &'static str, x: usize, y: usize },
    #[error("bin width factor must be positive and finite, got {0}")]
    InvalidFactor(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Metric {
    L1,
    Wasserstein1,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::L1 => "l1",
            Metric::Wasserstein1 => "wasserstein1",
        }
    }
}

/// Binned sample with explicit under/overflow counts.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(values: &[f64], edges: &[f64]) -> Result<Self, DivergenceError> {
        check_edges(edges)?;
        let mut h = Histogram {
            edges: edges.to_vec(),
            counts: alloc::vec![0; edges.len() - 1],
            underflow: 0,
            overflow: 0,
        };
        for &v in values {
            match support::bin_of(edges, v) {
                None => h.underflow += 1,
                Some(usize::MAX) => h.overflow += 1,
                Some(k) => h.counts[k] += 1,
            }
        }
        Ok(h)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// Normalised masses: `(underflow, per-bin, overflow)`.
    pub fn masses(&self) -> (f64, Vec<f64>, f64) {
        let n = self.total().max(1) as f64;
        (
            self.underflow as f64 / n,
            self.counts.iter().map(|&c| c as f64 / n).collect(),
            self.overflow as f64 / n,
        )
    }
}

fn check_edges(edges: &[f64]) -> Result<(), DivergenceError> {
    if edges.len() < 2
        || edges.iter().any(|e| !e.is_finite())
        || edges.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(DivergenceError::InvalidEdges);
    }
    Ok(())
}

fn non_empty(real: &[f64], gen: &[f64]) -> Result<(), DivergenceError> {
    if real.is_empty() {
        return Err(DivergenceError::EmptySample("real"));
    }
    if gen.is_empty() {
        return Err(DivergenceError::EmptySample("generated"));
    }
    Ok(())
}

/// Metric value with its interval and the data it was computed from.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DivergenceResult {
    pub metric: Metric,
    pub value: f64,
    pub ci: Option<(f64, f64)>,
    pub n_real: usize,
    pub n_gen: usize,
    /// Histogram edges (L1 only).
    pub edges: Vec<f64>,
    /// Wasserstein-1 before dividing by the sample size.
    pub raw_sum: Option<f64>,
    /// Bootstrap replicate values, kept for aggregate intervals.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub replicates: Vec<f64>,
}

/// Bin width `2 IQR / cbrt(n)` of a pooled sample (with the zero-IQR
/// fallback); `None` when all values are identical.
pub fn fd_bin_width(pooled: &[f64]) -> Result<Option<f64>, DivergenceError> {
    if pooled.len() < 2 {
        return Err(DivergenceError::TooFewValues { need: 2, got: pooled.len() });
    }
    let s = PairedSupport::new(pooled, &[]);
    Ok(support::fd_width(&s.values, &s.real, &s.gen))
}

/// Freedman-Diaconis edges over a pooled sample.
pub fn fd_bin_edges(pooled: &[f64]) -> Result<Vec<f64>, DivergenceError> {
    fd_bin_edges_scaled(pooled, 1.0)
}

/// As [`fd_bin_edges`], with the bin width multiplied by `factor`.
pub fn fd_bin_edges_scaled(pooled: &[f64], factor: f64) -> Result<Vec<f64>, DivergenceError> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(DivergenceError::InvalidFactor(factor));
    }
    if pooled.len() < 2 {
        return Err(DivergenceError::TooFewValues { need: 2, got: pooled.len() });
    }
    let s = PairedSupport::new(pooled, &[]);
    Ok(support::fd_edges(&s.values, &s.real, &s.gen, factor))
}

/// Total variation distance between normalised bin masses, in `[0, 1]`.
pub fn l1_distance(real: &[f64], gen: &[f64], edges: &[f64]) -> Result<f64, DivergenceError> {
    non_empty(real, gen)?;
    check_edges(edges)?;
    let s = PairedSupport::new(real, gen);
    Ok(support::l1_weighted(&s.values, &s.real, &s.gen, edges))
}

/// Wasserstein-1 value (per sample) and the order-statistic sum it
/// corresponds to for equal sample sizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wasserstein {
    pub value: f64,
    pub raw_sum: f64,
}

/// Wasserstein-1 between the two samples after normalising both by the
/// pooled mean and population standard deviation.
pub fn wasserstein1(real: &[f64], gen: &[f64]) -> Result<Wasserstein, DivergenceError> {
    non_empty(real, gen)?;
    let s = PairedSupport::new(real, gen);
    let value = support::w1_weighted(&s.values, &s.real, &s.gen);
    Ok(Wasserstein { value, raw_sum: value * real.len().max(gen.len()) as f64 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    pub const DEFAULT_REPLICATES: usize = 1000;

    pub fn new(replicates: usize, level: f64, seed: u64) -> Self {
        BootstrapConfig { replicates, level, seed }
    }

    fn validate(&self) -> Result<(), DivergenceError> {
        if self.replicates < 100 {
            return Err(DivergenceError::TooFewReplicates(self.replicates));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(DivergenceError::InvalidLevel(self.level));
        }
        Ok(())
    }
}

/// Percentile interval of `replicates` at `level`, widened to contain
/// `value` when estimator bias pushes the point estimate outside.
pub(crate) fn percentile_interval(replicates: &[f64], level: f64, value: f64) -> (f64, f64) {
    let s = stats::sorted(replicates);
    let tail = (1.0 - level) / 2.0;
    let lo = stats::quantile_sorted(&s, tail);
    let hi = stats::quantile_sorted(&s, 1.0 - tail);
    (lo.min(value), hi.max(value))
}

fn metric_on(
    metric: Metric,
    values: &[f64],
    a: &[u32],
    b: &[u32],
    factor: f64,
) -> (f64, Vec<f64>) {
    match metric {
        Metric::L1 => {
            let edges = support::fd_edges(values, a, b, factor);
            (support::l1_weighted(values, a, b, &edges), edges)
        }
        Metric::Wasserstein1 => (support::w1_weighted(values, a, b), Vec::new()),
    }
}

/// Point estimates for every metric, with percentile bootstrap intervals
/// when `bootstrap` is given. Each replicate resamples both datasets
/// independently and re-applies the full estimator (including binning).
pub fn evaluate(
    real: &[f64],
    gen: &[f64],
    metrics: &[Metric],
    bootstrap: Option<&BootstrapConfig>,
) -> Result<Vec<DivergenceResult>, DivergenceError> {
    non_empty(real, gen)?;
    if let Some(b) = bootstrap {
        b.validate()?;
    }
    let s = PairedSupport::new(real, gen);
    let mut results: Vec<DivergenceResult> = metrics
        .iter()
        .map(|&metric| {
            let (value, edges) = metric_on(metric, &s.values, &s.real, &s.gen, 1.0);
            DivergenceResult {
                metric,
                value,
                ci: None,
                n_real: real.len(),
                n_gen: gen.len(),
                edges,
                raw_sum: (metric == Metric::Wasserstein1)
                    .then(|| value * real.len().max(gen.len()) as f64),
                replicates: Vec::new(),
            }
        })
        .collect();
    if let Some(cfg) = bootstrap {
        let rs_real = Resampler::new(&s.real);
        let rs_gen = Resampler::new(&s.gen);
        let mut rng = stats::rng_from(cfg.seed, "bootstrap");
        for _ in 0..cfg.replicates {
            let a = rs_real.draw(&mut rng);
            let b = rs_gen.draw(&mut rng);
            for r in results.iter_mut() {
                let (v, _) = metric_on(r.metric, &s.values, &a, &b, 1.0);
                r.replicates.push(v);
            }
        }
        for r in results.iter_mut() {
            r.ci = Some(percentile_interval(&r.replicates, cfg.level, r.value));
        }
    }
    Ok(results)
}

/// Bootstrap interval and replicates of an arbitrary two-sample statistic.
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapInterval {
    pub low: f64,
    pub high: f64,
    pub value: f64,
    pub replicates: Vec<f64>,
}

/// Percentile bootstrap of `statistic` over independent resampling of both
/// samples. Replicate `b` draws from its own derived stream, so results do
/// not depend on evaluation order.
pub fn bootstrap_ci<F>(
    statistic: F,
    real: &[f64],
    gen: &[f64],
    config: &BootstrapConfig,
) -> Result<BootstrapInterval, DivergenceError>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    non_empty(real, gen)?;
    config.validate()?;
    let value = statistic(real, gen);
    let mut ra = alloc::vec![0.0; real.len()];
    let mut ga = alloc::vec![0.0; gen.len()];
    let mut replicates = Vec::with_capacity(config.replicates);
    for b in 0..config.replicates {
        let mut rng = replicate_rng(config.seed, b);
        for slot in ra.iter_mut() {
            *slot = real[rng.random_range(0..real.len())];
        }
        for slot in ga.iter_mut() {
            *slot = gen[rng.random_range(0..gen.len())];
        }
        replicates.push(statistic(&ra, &ga));
    }
    let (low, high) = percentile_interval(&replicates, config.level, value);
    Ok(BootstrapInterval { low, high, value, replicates })
}

fn replicate_rng(seed: u64, b: usize) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(stats::derive_seed(seed, "replicate") ^ (b as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Minimum number of distinct sequences for sequence-level resampling.
pub const MIN_THRESHOLD_CLUSTERS: usize = 20;

/// Significance threshold for L1: the `level` quantile of L1 distances
/// between the two halves of bootstrap resamples of the real data.
///
/// With `groups` (sequence ids per value) spanning at least
/// [`MIN_THRESHOLD_CLUSTERS`] sequences, whole sequences are resampled so
/// within-sequence dependence is preserved; otherwise single values are.
pub fn real_real_threshold(
    values: &[f64],
    groups: Option<&[u32]>,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<f64, DivergenceError> {
    const MIN_VALUES: usize = 20;
    if values.len() < MIN_VALUES {
        return Err(DivergenceError::TooFewValues { need: MIN_VALUES, got: values.len() });
    }
    if let Some(g) = groups {
        if g.len() != values.len() {
            return Err(DivergenceError::Misaligned { dataset: "real", x: values.len(), y: g.len() });
        }
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(DivergenceError::InvalidLevel(level));
    }
    let sorted = stats::sorted(values);
    let mut distinct: Vec<f64> = Vec::new();
    for &v in &sorted {
        if distinct.last() != Some(&v) {
            distinct.push(v);
        }
    }
    let pos_of = |v: f64| distinct.partition_point(|&d| d < v) as u32;

    let mut clusters: Vec<Vec<u32>> = Vec::new();
    if let Some(g) = groups {
        let mut ids: Vec<u32> = g.to_vec();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() >= MIN_THRESHOLD_CLUSTERS {
            clusters = alloc::vec![Vec::new(); ids.len()];
            for (v, gid) in values.iter().zip(g) {
                let c = ids.binary_search(gid).unwrap();
                clusters[c].push(pos_of(*v));
            }
        }
    }
    let mut rng = stats::rng_from(seed, "real_real_threshold");
    let mut out = Vec::with_capacity(replicates.max(1));
    if clusters.is_empty() {
        // single values: each half is a multinomial resample of the counts
        let mut counts = alloc::vec![0u32; distinct.len()];
        for &v in values {
            counts[pos_of(v) as usize] += 1;
        }
        let rs = Resampler::new(&counts);
        let n = values.len() as u64;
        for _ in 0..replicates.max(1) {
            let a = rs.draw_n(&mut rng, n / 2);
            let b = rs.draw_n(&mut rng, n - n / 2);
            let edges = support::fd_edges(&distinct, &a, &b, 1.0);
            out.push(support::l1_weighted(&distinct, &a, &b, &edges));
        }
    } else {
        let g = clusters.len();
        let half = g / 2;
        let mut a = alloc::vec![0u32; distinct.len()];
        let mut b = alloc::vec![0u32; distinct.len()];
        for _ in 0..replicates.max(1) {
            a.iter_mut().for_each(|x| *x = 0);
            b.iter_mut().for_each(|x| *x = 0);
            for i in 0..g {
                let c = &clusters[rng.random_range(0..g)];
                let target = if i < half { &mut a } else { &mut b };
                for &p in c {
                    target[p as usize] += 1;
                }
            }
            if support::total(&a) == 0 || support::total(&b) == 0 {
                out.push(0.0);
                continue;
            }
            let edges = support::fd_edges(&distinct, &a, &b, 1.0);
            out.push(support::l1_weighted(&distinct, &a, &b, &edges));
        }
    }
    stats::sort_floats(&mut out);
    Ok(stats::quantile_sorted(&out, level))
}

/// L1 recomputed with the FD bin width multiplied by `factor`.
pub fn bin_ablation(real: &[f64], gen: &[f64], factor: f64) -> Result<DivergenceResult, DivergenceError> {
    non_empty(real, gen)?;
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(DivergenceError::InvalidFactor(factor));
    }
    let s = PairedSupport::new(real, gen);
    let (value, edges) = metric_on(Metric::L1, &s.values, &s.real, &s.gen, factor);
    Ok(DivergenceResult {
        metric: Metric::L1,
        value,
        ci: None,
        n_real: real.len(),
        n_gen: gen.len(),
        edges,
        raw_sum: None,
        replicates: Vec::new(),
    })
}
