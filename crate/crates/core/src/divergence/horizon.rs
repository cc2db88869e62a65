//! Divergence as a function of the generation step.

use alloc::vec::Vec;

use super::support::{self, PairedSupport, Resampler};
use super::{percentile_interval, BootstrapConfig, DivergenceError, DivergenceResult, Metric};
use crate::stats;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HorizonPoint {
    /// Steps `[start, end)`.
    pub start: u32,
    pub end: u32,
    pub n_gen: usize,
    /// `None` when no generated value falls in the interval.
    pub result: Option<DivergenceResult>,
}

/// `count` equal-width half-open step intervals covering `1..=max_step`.
pub fn default_intervals(max_step: u32, count: usize) -> Vec<(u32, u32)> {
    let m = u64::from(max_step.max(1));
    let count = count.max(1) as u64;
    let mut cuts: Vec<u32> = (0..=count).map(|k| (1 + k * m / count) as u32).collect();
    cuts.dedup();
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Full real distribution against generated values whose step lies in each
/// interval. L1 uses one set of FD edges from the pooled full samples.
pub fn horizon_divergence(
    real: &[f64],
    gen: &[f64],
    gen_steps: &[u32],
    intervals: &[(u32, u32)],
    metric: Metric,
    bootstrap: Option<&BootstrapConfig>,
) -> Result<Vec<HorizonPoint>, DivergenceError> {
    super::non_empty(real, gen)?;
    if gen.len() != gen_steps.len() {
        return Err(DivergenceError::Misaligned { dataset: "generated", x: gen.len(), y: gen_steps.len() });
    }
    if let Some(b) = bootstrap {
        b.validate()?;
    }
    let full = PairedSupport::new(real, gen);
    let edges = support::fd_edges(&full.values, &full.real, &full.gen, 1.0);

    let mut out = Vec::with_capacity(intervals.len());
    for (k, &(start, end)) in intervals.iter().enumerate() {
        let subset: Vec<f64> = gen
            .iter()
            .zip(gen_steps)
            .filter(|(_, &s)| s >= start && s < end)
            .map(|(&v, _)| v)
            .collect();
        if subset.is_empty() {
            out.push(HorizonPoint { start, end, n_gen: 0, result: None });
            continue;
        }
        let s = PairedSupport::new(real, &subset);
        let stat = |a: &[u32], b: &[u32]| match metric {
            Metric::L1 => support::l1_weighted(&s.values, a, b, &edges),
            Metric::Wasserstein1 => support::w1_weighted(&s.values, a, b),
        };
        let value = stat(&s.real, &s.gen);
        let mut result = DivergenceResult {
            metric,
            value,
            ci: None,
            n_real: real.len(),
            n_gen: subset.len(),
            edges: if metric == Metric::L1 { edges.clone() } else { Vec::new() },
            raw_sum: (metric == Metric::Wasserstein1).then(|| value * real.len().max(subset.len()) as f64),
            replicates: Vec::new(),
        };
        if let Some(cfg) = bootstrap {
            let (ra, rb) = (Resampler::new(&s.real), Resampler::new(&s.gen));
            let mut rng = stats::rng_from(cfg.seed, &alloc::format!("horizon{k}"));
            result.replicates = (0..cfg.replicates)
                .map(|_| {
                    let a = ra.draw(&mut rng);
                    let b = rb.draw(&mut rng);
                    stat(&a, &b)
                })
                .collect();
            result.ci = Some(percentile_interval(&result.replicates, cfg.level, value));
        }
        out.push(HorizonPoint { start, end, n_gen: subset.len(), result: Some(result) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_intervals_cover_all_steps() {
        let iv = default_intervals(100, 10);
        assert_eq!(iv.len(), 10);
        assert_eq!(iv[0], (1, 11));
        assert_eq!(iv[9].1, 101);
        let small = default_intervals(3, 10);
        assert_eq!(small, [(1, 2), (2, 3), (3, 4)]);
    }

    #[test]
    fn single_interval_matches_unconditional() {
        let real: Vec<f64> = (0..300).map(|i| libm::sin(i as f64)).collect();
        let gen: Vec<f64> = (0..200).map(|i| libm::sin(i as f64 * 0.9) * 1.2).collect();
        let steps: Vec<u32> = (1..=200).collect();
        for metric in [Metric::L1, Metric::Wasserstein1] {
            let h = horizon_divergence(&real, &gen, &steps, &[(1, 201)], metric, None).unwrap();
            let u = super::super::evaluate(&real, &gen, &[metric], None).unwrap();
            assert!((h[0].result.as_ref().unwrap().value - u[0].value).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_interval_is_omitted() {
        let h = horizon_divergence(&[1.0, 2.0], &[1.0], &[1], &[(1, 2), (2, 3)], Metric::L1, None).unwrap();
        assert!(h[0].result.is_some());
        assert!(h[1].result.is_none());
    }
}
