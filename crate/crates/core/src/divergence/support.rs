//! Weighted distinct-value supports.
//!
//! A sample is represented as sorted distinct values with integer
//! multiplicities. Point estimates use the observed multiplicities and
//! bootstrap replicates only swap in resampled ones, so every statistic
//! below runs in time linear in the number of distinct values.

use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rand_distr::{Binomial, Distribution};

use crate::math;
use crate::stats::{self, Rng};

/// Upper bound on the number of histogram bins.
pub const MAX_BINS: usize = 100_000;

/// Two samples over a shared sorted support.
#[derive(Clone, Debug)]
pub(crate) struct PairedSupport {
    pub values: Vec<f64>,
    pub real: Vec<u32>,
    pub gen: Vec<u32>,
}

fn distinct_counts(sorted: &[f64]) -> (Vec<f64>, Vec<u32>) {
    let mut values = Vec::new();
    let mut counts: Vec<u32> = Vec::new();
    for &v in sorted {
        match values.last() {
            Some(&last) if last == v => *counts.last_mut().unwrap() += 1,
            _ => {
                values.push(v);
                counts.push(1);
            }
        }
    }
    (values, counts)
}

impl PairedSupport {
    pub fn new(real: &[f64], gen: &[f64]) -> Self {
        let (rv, rc) = distinct_counts(&stats::sorted(real));
        let (gv, gc) = distinct_counts(&stats::sorted(gen));
        let mut values = Vec::with_capacity(rv.len() + gv.len());
        let mut r = Vec::with_capacity(rv.len() + gv.len());
        let mut g = Vec::with_capacity(rv.len() + gv.len());
        let (mut i, mut j) = (0, 0);
        while i < rv.len() || j < gv.len() {
            let take_r = j >= gv.len() || (i < rv.len() && rv[i] <= gv[j]);
            let take_g = i >= rv.len() || (j < gv.len() && gv[j] <= rv[i]);
            let v = if take_r { rv[i] } else { gv[j] };
            values.push(v);
            r.push(if take_r { rc[i] } else { 0 });
            g.push(if take_g { gc[j] } else { 0 });
            if take_r {
                i += 1;
            }
            if take_g {
                j += 1;
            }
        }
        PairedSupport { values, real: r, gen: g }
    }
}

pub(crate) fn total(counts: &[u32]) -> u64 {
    counts.iter().map(|&c| u64::from(c)).sum()
}

/// Values at the given ascending 0-based ranks of the pooled expanded sample.
fn values_at_ranks(values: &[f64], a: &[u32], b: &[u32], ranks: &[u64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(ranks.len());
    let mut cum = 0u64;
    let mut k = 0usize;
    for &r in ranks {
        while k < values.len() {
            let w = u64::from(a[k]) + u64::from(b[k]);
            if cum + w > r {
                break;
            }
            cum += w;
            k += 1;
        }
        out.push(values[k.min(values.len() - 1)]);
    }
    out
}

/// Linear-interpolation quantiles of the pooled weighted sample.
pub(crate) fn pooled_quantiles(values: &[f64], a: &[u32], b: &[u32], qs: &[f64]) -> Vec<f64> {
    let n = total(a) + total(b);
    debug_assert!(n > 0);
    let mut ranks = Vec::with_capacity(2 * qs.len());
    let mut fracs = Vec::with_capacity(qs.len());
    for &q in qs {
        let h = (n - 1) as f64 * q;
        let lo = math::floor(h) as u64;
        ranks.push(lo);
        ranks.push((lo + 1).min(n - 1));
        fracs.push(h - lo as f64);
    }
    let mut order: Vec<usize> = (0..ranks.len()).collect();
    order.sort_by_key(|&i| ranks[i]);
    let sorted_ranks: Vec<u64> = order.iter().map(|&i| ranks[i]).collect();
    let found = values_at_ranks(values, a, b, &sorted_ranks);
    let mut at = alloc::vec![0.0; ranks.len()];
    for (slot, &i) in order.iter().enumerate() {
        at[i] = found[slot];
    }
    fracs
        .iter()
        .enumerate()
        .map(|(i, f)| at[2 * i] + f * (at[2 * i + 1] - at[2 * i]))
        .collect()
}

/// Smallest and largest pooled values present.
fn pooled_extent(values: &[f64], a: &[u32], b: &[u32]) -> (f64, f64) {
    let present = |k: &usize| a[*k] != 0 || b[*k] != 0;
    match ((0..values.len()).find(present), (0..values.len()).rev().find(present)) {
        (Some(lo), Some(hi)) => (values[lo], values[hi]),
        _ => (f64::NAN, f64::NAN),
    }
}

/// Smallest positive gap between consecutive pooled values present.
fn smallest_gap(values: &[f64], a: &[u32], b: &[u32]) -> f64 {
    let mut gap = f64::INFINITY;
    let mut prev: Option<f64> = None;
    for k in 0..values.len() {
        if a[k] == 0 && b[k] == 0 {
            continue;
        }
        if let Some(p) = prev {
            if values[k] > p {
                gap = gap.min(values[k] - p);
            }
        }
        prev = Some(values[k]);
    }
    gap
}

/// Freedman-Diaconis width `2 IQR / cbrt(n)` of the pooled weighted sample,
/// with the zero-IQR fallback `max(range / sqrt(n), smallest positive gap)`.
/// Returns `None` when all pooled values coincide.
pub(crate) fn fd_width(values: &[f64], a: &[u32], b: &[u32]) -> Option<f64> {
    let n = (total(a) + total(b)) as f64;
    let (min, max) = pooled_extent(values, a, b);
    if !(max > min) {
        return None;
    }
    let q = pooled_quantiles(values, a, b, &[0.25, 0.75]);
    let iqr = q[1] - q[0];
    if iqr > 0.0 {
        Some(2.0 * iqr / math::cbrt(n))
    } else {
        Some(((max - min) / math::sqrt(n)).max(smallest_gap(values, a, b)))
    }
}

/// Uniform-width edges spanning `[min, max]`.
pub(crate) fn uniform_edges(min: f64, max: f64, width: f64) -> Vec<f64> {
    let mut width = width;
    let mut nbins = math::ceil((max - min) / width).max(1.0) as usize;
    if nbins > MAX_BINS {
        nbins = MAX_BINS;
        width = (max - min) / MAX_BINS as f64;
    }
    let mut edges: Vec<f64> = (0..=nbins).map(|k| min + k as f64 * width).collect();
    let last = edges.len() - 1;
    if edges[last] < max {
        edges[last] = max;
    }
    edges
}

/// FD edges over the pooled weighted sample, bin width scaled by `factor`.
pub(crate) fn fd_edges(values: &[f64], a: &[u32], b: &[u32], factor: f64) -> Vec<f64> {
    let (min, max) = pooled_extent(values, a, b);
    match fd_width(values, a, b) {
        Some(w) => uniform_edges(min, max, w * factor),
        None => alloc::vec![min - 0.5, min + 0.5],
    }
}

/// Bin index of `v`: `None` below the first edge (`Some(usize::MAX)` above
/// the last). Bins are half-open except the last, which is closed.
pub(crate) fn bin_of(edges: &[f64], v: f64) -> Option<usize> {
    let nb = edges.len() - 1;
    if v < edges[0] {
        return None;
    }
    if v > edges[nb] {
        return Some(usize::MAX);
    }
    let k = edges.partition_point(|&e| e <= v);
    Some((k.max(1) - 1).min(nb - 1))
}

/// Total variation between the two weighted samples under `edges`;
/// under/overflow masses act as two extra bins.
pub(crate) fn l1_weighted(values: &[f64], a: &[u32], b: &[u32], edges: &[f64]) -> f64 {
    let na = total(a) as f64;
    let nb = total(b) as f64;
    let last = edges.len() - 2;
    // bin ids: 0 underflow, 1 + k for bin k, last + 2 overflow; values are
    // ascending so the id never decreases
    let mut cursor = 0usize;
    let mut sum = 0.0;
    let mut current = usize::MAX;
    let (mut ca, mut cb) = (0u64, 0u64);
    // zero-count entries contribute nothing wherever they land
    for k in 0..values.len() {
        let v = values[k];
        let id = if v < edges[0] {
            0
        } else if v > edges[last + 1] {
            last + 2
        } else {
            while cursor < last && edges[cursor + 1] <= v {
                cursor += 1;
            }
            1 + cursor
        };
        if id != current {
            if current != usize::MAX {
                sum += (ca as f64 / na - cb as f64 / nb).abs();
            }
            current = id;
            ca = 0;
            cb = 0;
        }
        ca += u64::from(a[k]);
        cb += u64::from(b[k]);
    }
    if current != usize::MAX {
        sum += (ca as f64 / na - cb as f64 / nb).abs();
    }
    0.5 * sum
}

/// Pooled mean and population standard deviation.
pub(crate) fn pooled_moments(values: &[f64], a: &[u32], b: &[u32]) -> (f64, f64) {
    let n = (total(a) + total(b)) as f64;
    let mut s = 0.0;
    for k in 0..values.len() {
        s += values[k] * f64::from(a[k] + b[k]);
    }
    let mean = s / n;
    let mut ss = 0.0;
    for k in 0..values.len() {
        let d = values[k] - mean;
        ss += d * d * f64::from(a[k] + b[k]);
    }
    (mean, math::sqrt(ss / n))
}

/// Integral of `|F_a - F_b|` on raw values.
pub(crate) fn ecdf_gap_integral(values: &[f64], a: &[u32], b: &[u32]) -> f64 {
    let na = total(a) as f64;
    let nb = total(b) as f64;
    let (mut ca, mut cb) = (0u64, 0u64);
    let mut integral = 0.0;
    for k in 0..values.len().saturating_sub(1) {
        ca += u64::from(a[k]);
        cb += u64::from(b[k]);
        let gap = (ca as f64 / na - cb as f64 / nb).abs();
        integral += gap * (values[k + 1] - values[k]);
    }
    integral
}

/// Wasserstein-1 after pooled mean-variance normalisation.
pub(crate) fn w1_weighted(values: &[f64], a: &[u32], b: &[u32]) -> f64 {
    let (_, sd) = pooled_moments(values, a, b);
    if sd > 0.0 {
        ecdf_gap_integral(values, a, b) / sd
    } else {
        0.0
    }
}

/// Draws multinomial resamples of a count vector (`n` draws with
/// replacement from the sample the counts describe).
#[derive(Clone, Debug)]
pub(crate) struct Resampler {
    len: usize,
    n: u64,
    mode: Mode,
}

#[derive(Clone, Debug)]
enum Mode {
    /// Category of every original unit; draws uniform unit indices.
    Units(Vec<u32>),
    /// Sequential conditional binomials over non-empty categories.
    Binomial(Vec<(u32, u32)>),
}

impl Resampler {
    pub fn new(counts: &[u32]) -> Self {
        let n = total(counts);
        let nonzero: Vec<(u32, u32)> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| (k as u32, c))
            .collect();
        let mode = if (nonzero.len() as u64) * 4 < n {
            Mode::Binomial(nonzero)
        } else {
            let mut units = Vec::with_capacity(n as usize);
            for (k, c) in nonzero {
                units.extend(core::iter::repeat_n(k, c as usize));
            }
            Mode::Units(units)
        };
        Resampler { len: counts.len(), n, mode }
    }

    pub fn draw(&self, rng: &mut Rng) -> Vec<u32> {
        self.draw_n(rng, self.n)
    }

    /// `size` draws with replacement.
    pub fn draw_n(&self, rng: &mut Rng, size: u64) -> Vec<u32> {
        let mut out = alloc::vec![0u32; self.len];
        match &self.mode {
            Mode::Units(units) => {
                let mut fast = Xoshiro256PlusPlus::seed_from_u64(rng.next_u64());
                let m = units.len() as u32;
                let mut left = size;
                while left >= 2 {
                    let (i, j) = index_pair(&mut fast, m);
                    out[units[i as usize] as usize] += 1;
                    out[units[j as usize] as usize] += 1;
                    left -= 2;
                }
                if left == 1 {
                    let (i, _) = index_pair(&mut fast, m);
                    out[units[i as usize] as usize] += 1;
                }
            }
            Mode::Binomial(cats) => {
                let mut left_n = size;
                let mut left_c: u64 = cats.iter().map(|&(_, c)| u64::from(c)).sum();
                for &(k, c) in cats {
                    if left_n == 0 {
                        break;
                    }
                    let c = u64::from(c);
                    let x = if c >= left_c {
                        left_n
                    } else {
                        let p = c as f64 / left_c as f64;
                        Binomial::new(left_n, p).expect("valid binomial").sample(rng)
                    };
                    out[k as usize] = x as u32;
                    left_n -= x;
                    left_c -= c;
                }
            }
        }
        out
    }
}

/// Two unbiased uniform indices below `m` from one 64-bit draw (Lemire's
/// multiply-shift with rejection).
#[inline]
fn index_pair(rng: &mut Xoshiro256PlusPlus, m: u32) -> (u32, u32) {
    let threshold = m.wrapping_neg() % m;
    loop {
        let x = rng.next_u64();
        let a = u64::from(x as u32) * u64::from(m);
        let b = (x >> 32) * u64::from(m);
        if (a as u32) >= threshold && (b as u32) >= threshold {
            return ((a >> 32) as u32, (b >> 32) as u32);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn merge_keeps_counts() {
        let s = PairedSupport::new(&[1.0, 1.0, 3.0], &[2.0, 3.0, 3.0]);
        assert_eq!(s.values, [1.0, 2.0, 3.0]);
        assert_eq!(s.real, [2, 0, 1]);
        assert_eq!(s.gen, [0, 1, 2]);
    }

    #[test]
    fn weighted_quantiles_match_expanded() {
        let s = PairedSupport::new(&[1.0, 2.0, 2.0, 5.0], &[3.0, 9.0]);
        let q = pooled_quantiles(&s.values, &s.real, &s.gen, &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let expanded = stats::sorted(&[1.0, 2.0, 2.0, 5.0, 3.0, 9.0]);
        for (i, qq) in [0.0, 0.25, 0.5, 0.75, 1.0].iter().enumerate() {
            assert!((q[i] - stats::quantile_sorted(&expanded, *qq)).abs() < 1e-12);
        }
    }

    #[test]
    fn resampler_preserves_total() {
        let mut rng = Rng::seed_from_u64(3);
        for counts in [alloc::vec![5u32, 0, 7, 1], alloc::vec![1000, 2000, 3]] {
            let r = Resampler::new(&counts);
            let d = r.draw(&mut rng);
            assert_eq!(total(&d), total(&counts));
            for (k, &c) in counts.iter().enumerate() {
                if c == 0 {
                    assert_eq!(d[k], 0);
                }
            }
        }
    }

    #[test]
    fn bins_half_open_last_closed() {
        let e = [0.0, 1.0, 2.0];
        assert_eq!(bin_of(&e, -0.1), None);
        assert_eq!(bin_of(&e, 0.0), Some(0));
        assert_eq!(bin_of(&e, 1.0), Some(1));
        assert_eq!(bin_of(&e, 2.0), Some(1));
        assert_eq!(bin_of(&e, 2.5), Some(usize::MAX));
    }
}
