//! Discriminator networks with hand-written gradients.
//!
//! Parameters live in one flat vector so the optimiser and the model
//! container do not need to know the layout.

use alloc::vec::Vec;

use super::encode::DeltaStep;
use crate::math;

pub const CHANNELS: usize = 3;
/// mean, std, min, max per channel.
pub const POOLED_FEATURES: usize = 4 * CHANNELS;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Architecture {
    /// Temporal convolution, ReLU, attention pooling, linear output.
    ConvAttention,
    /// Summary statistics of each channel fed to logistic regression.
    PooledLogistic,
}

impl Architecture {
    pub fn code(self) -> u8 {
        match self {
            Architecture::ConvAttention => 1,
            Architecture::PooledLogistic => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Architecture::ConvAttention),
            2 => Some(Architecture::PooledLogistic),
            _ => None,
        }
    }
}

/// A trained (or freshly initialised) discriminator.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub arch: Architecture,
    pub window: usize,
    pub filters: usize,
    pub width: usize,
    /// Per-channel input standardisation.
    pub input_mean: [f64; CHANNELS],
    pub input_std: [f64; CHANNELS],
    /// Pooled-feature standardisation (pooled architecture only).
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub params: Vec<f64>,
}

/// Offsets into the flat parameter vector of the convolutional model.
#[derive(Clone, Copy, Debug)]
struct ConvLayout {
    filters: usize,
    width: usize,
    b: usize,
    v: usize,
    ow: usize,
    ob: usize,
    len: usize,
}

impl ConvLayout {
    fn new(filters: usize, width: usize) -> Self {
        let w = filters * width * CHANNELS;
        ConvLayout {
            filters,
            width,
            b: w,
            v: w + filters,
            ow: w + 2 * filters,
            ob: w + 3 * filters,
            len: w + 3 * filters + 1,
        }
    }

    #[inline]
    fn w(&self, f: usize, k: usize, c: usize) -> usize {
        (f * self.width + k) * CHANNELS + c
    }
}

pub fn param_count(arch: Architecture, filters: usize, width: usize) -> usize {
    match arch {
        Architecture::ConvAttention => ConvLayout::new(filters, width).len,
        Architecture::PooledLogistic => POOLED_FEATURES + 1,
    }
}

/// Scratch buffers reused across samples.
#[derive(Default)]
pub(crate) struct Workspace {
    pre: Vec<f64>,
    h: Vec<f64>,
    a: Vec<f64>,
    z: Vec<f64>,
    dh: Vec<f64>,
}

impl Discriminator {
    /// Standardised `window x CHANNELS` input (row-major); pads or
    /// truncates to the window length.
    pub fn prepare(&self, steps: &[DeltaStep]) -> Vec<f64> {
        let mut x = alloc::vec![0.0; self.window * CHANNELS];
        for (t, s) in steps.iter().take(self.window).enumerate() {
            let ch = s.channels();
            for c in 0..CHANNELS {
                x[t * CHANNELS + c] = (ch[c] - self.input_mean[c]) / self.input_std[c];
            }
        }
        x
    }

    /// Raw summary features of a window.
    pub fn pooled_features(x: &[f64]) -> [f64; POOLED_FEATURES] {
        let t_len = (x.len() / CHANNELS).max(1) as f64;
        let mut f = [0.0; POOLED_FEATURES];
        for c in 0..CHANNELS {
            let col = x.iter().skip(c).step_by(CHANNELS);
            let (mut s, mut ss, mut mn, mut mx) = (0.0, 0.0, f64::INFINITY, f64::NEG_INFINITY);
            for &v in col {
                s += v;
                ss += v * v;
                mn = mn.min(v);
                mx = mx.max(v);
            }
            let m = s / t_len;
            f[4 * c] = m;
            f[4 * c + 1] = math::sqrt((ss / t_len - m * m).max(0.0));
            f[4 * c + 2] = if mn.is_finite() { mn } else { 0.0 };
            f[4 * c + 3] = if mx.is_finite() { mx } else { 0.0 };
        }
        f
    }

    fn standardized_features(&self, x: &[f64]) -> [f64; POOLED_FEATURES] {
        let mut f = Self::pooled_features(x);
        for (i, v) in f.iter_mut().enumerate() {
            *v = (*v - self.feature_mean[i]) / self.feature_std[i];
        }
        f
    }

    /// Pre-sigmoid output for a window.
    pub fn logit(&self, steps: &[DeltaStep]) -> f64 {
        let x = self.prepare(steps);
        let mut ws = Workspace::default();
        self.forward(&x, &mut ws)
    }

    pub fn probability(&self, steps: &[DeltaStep]) -> f64 {
        math::sigmoid(self.logit(steps))
    }

    pub(crate) fn forward(&self, x: &[f64], ws: &mut Workspace) -> f64 {
        match self.arch {
            Architecture::ConvAttention => self.conv_forward(x, ws),
            Architecture::PooledLogistic => {
                let f = self.standardized_features(x);
                let p = &self.params;
                f.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() + p[POOLED_FEATURES]
            }
        }
    }

    /// Adds `dlogit * d(logit)/d(params)` for input `x` to `grad`.
    pub(crate) fn backward(&self, x: &[f64], dlogit: f64, ws: &mut Workspace, grad: &mut [f64]) {
        match self.arch {
            Architecture::ConvAttention => self.conv_backward(x, dlogit, ws, grad),
            Architecture::PooledLogistic => {
                let f = self.standardized_features(x);
                for i in 0..POOLED_FEATURES {
                    grad[i] += dlogit * f[i];
                }
                grad[POOLED_FEATURES] += dlogit;
            }
        }
    }

    fn conv_forward(&self, x: &[f64], ws: &mut Workspace) -> f64 {
        let lay = ConvLayout::new(self.filters, self.width);
        let p = &self.params;
        let t_len = x.len() / CHANNELS;
        let nf = lay.filters;
        let half = lay.width / 2;
        ws.pre.clear();
        ws.pre.resize(t_len * nf, 0.0);
        ws.h.clear();
        ws.h.resize(t_len * nf, 0.0);
        for t in 0..t_len {
            for f in 0..nf {
                let mut acc = p[lay.b + f];
                for k in 0..lay.width {
                    let src = t + k;
                    if src < half || src - half >= t_len {
                        continue;
                    }
                    let row = (src - half) * CHANNELS;
                    for c in 0..CHANNELS {
                        acc += p[lay.w(f, k, c)] * x[row + c];
                    }
                }
                ws.pre[t * nf + f] = acc;
                ws.h[t * nf + f] = acc.max(0.0);
            }
        }
        // attention weights
        ws.a.clear();
        let mut smax = f64::NEG_INFINITY;
        for t in 0..t_len {
            let s: f64 = (0..nf).map(|f| p[lay.v + f] * ws.h[t * nf + f]).sum();
            ws.a.push(s);
            smax = smax.max(s);
        }
        let mut norm = 0.0;
        for s in ws.a.iter_mut() {
            *s = math::exp(*s - smax);
            norm += *s;
        }
        for s in ws.a.iter_mut() {
            *s /= norm;
        }
        ws.z.clear();
        ws.z.resize(nf, 0.0);
        for t in 0..t_len {
            for f in 0..nf {
                ws.z[f] += ws.a[t] * ws.h[t * nf + f];
            }
        }
        (0..nf).map(|f| p[lay.ow + f] * ws.z[f]).sum::<f64>() + p[lay.ob]
    }

    /// Expects `ws` to hold the forward pass for `x`.
    fn conv_backward(&self, x: &[f64], g: f64, ws: &mut Workspace, grad: &mut [f64]) {
        let lay = ConvLayout::new(self.filters, self.width);
        let p = &self.params;
        let t_len = x.len() / CHANNELS;
        let nf = lay.filters;
        let half = lay.width / 2;

        let dz: Vec<f64> = (0..nf).map(|f| g * p[lay.ow + f]).collect();
        for f in 0..nf {
            grad[lay.ow + f] += g * ws.z[f];
        }
        grad[lay.ob] += g;

        let mut da = alloc::vec![0.0; t_len];
        let mut abar = 0.0;
        for t in 0..t_len {
            da[t] = (0..nf).map(|f| ws.h[t * nf + f] * dz[f]).sum();
            abar += ws.a[t] * da[t];
        }
        ws.dh.clear();
        ws.dh.resize(t_len * nf, 0.0);
        for t in 0..t_len {
            let ds = ws.a[t] * (da[t] - abar);
            for f in 0..nf {
                let h = ws.h[t * nf + f];
                grad[lay.v + f] += ds * h;
                let dh = ws.a[t] * dz[f] + ds * p[lay.v + f];
                ws.dh[t * nf + f] = if ws.pre[t * nf + f] > 0.0 { dh } else { 0.0 };
            }
        }
        for t in 0..t_len {
            for f in 0..nf {
                let d = ws.dh[t * nf + f];
                if d == 0.0 {
                    continue;
                }
                grad[lay.b + f] += d;
                for k in 0..lay.width {
                    let src = t + k;
                    if src < half || src - half >= t_len {
                        continue;
                    }
                    let row = (src - half) * CHANNELS;
                    for c in 0..CHANNELS {
                        grad[lay.w(f, k, c)] += d * x[row + c];
                    }
                }
            }
        }
    }
}

/// Initial parameters: He-scaled convolution, small attention vector and
/// a near-zero output layer so the untrained model is uninformative.
pub(crate) fn init_params(arch: Architecture, filters: usize, width: usize, rng: &mut crate::stats::Rng) -> Vec<f64> {
    use crate::stats::standard_normal;
    match arch {
        Architecture::PooledLogistic => alloc::vec![0.0; POOLED_FEATURES + 1],
        Architecture::ConvAttention => {
            let lay = ConvLayout::new(filters, width);
            let mut p = alloc::vec![0.0; lay.len];
            let he = math::sqrt(2.0 / (width * CHANNELS) as f64);
            for v in p[..lay.b].iter_mut() {
                *v = he * standard_normal(rng);
            }
            for v in p[lay.v..lay.ow].iter_mut() {
                *v = 0.1 * standard_normal(rng);
            }
            for v in p[lay.ow..lay.ob].iter_mut() {
                *v = 1e-3 * standard_normal(rng);
            }
            p
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn model(arch: Architecture, seed: u64) -> Discriminator {
        let mut rng = stats::rng_from(seed, "init");
        let mut params = init_params(arch, 4, 3, &mut rng);
        // make the output layer large enough for a meaningful check
        for p in params.iter_mut() {
            *p += 0.3 * stats::standard_normal(&mut rng);
        }
        Discriminator {
            arch,
            window: 7,
            filters: 4,
            width: 3,
            input_mean: [0.0; CHANNELS],
            input_std: [1.0; CHANNELS],
            feature_mean: alloc::vec![0.1; POOLED_FEATURES],
            feature_std: alloc::vec![1.5; POOLED_FEATURES],
            params,
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for arch in [Architecture::ConvAttention, Architecture::PooledLogistic] {
            let mut m = model(arch, 11);
            let mut rng = stats::rng_from(5, "x");
            let x: Vec<f64> = (0..m.window * CHANNELS).map(|_| stats::standard_normal(&mut rng)).collect();
            let mut ws = Workspace::default();
            m.forward(&x, &mut ws);
            let mut grad = alloc::vec![0.0; m.params.len()];
            m.backward(&x, 1.0, &mut ws, &mut grad);
            let h = 1e-6;
            for i in 0..m.params.len() {
                let orig = m.params[i];
                m.params[i] = orig + h;
                let up = m.forward(&x, &mut ws);
                m.params[i] = orig - h;
                let down = m.forward(&x, &mut ws);
                m.params[i] = orig;
                let fd = (up - down) / (2.0 * h);
                assert!((fd - grad[i]).abs() < 1e-6 * (1.0 + fd.abs()), "{arch:?} param {i}: {fd} vs {}", grad[i]);
            }
        }
    }

    #[test]
    fn untrained_output_is_near_zero() {
        let mut rng = stats::rng_from(1, "init");
        let m = Discriminator {
            arch: Architecture::ConvAttention,
            window: 10,
            filters: 16,
            width: 5,
            input_mean: [0.0; CHANNELS],
            input_std: [1.0; CHANNELS],
            feature_mean: Vec::new(),
            feature_std: Vec::new(),
            params: init_params(Architecture::ConvAttention, 16, 5, &mut rng),
        };
        let steps = [DeltaStep { mid_change: 1.0, rel_level: -2, qty_change: 3 }; 10];
        assert!(m.logit(&steps).abs() < 0.05);
        assert_eq!(m.logit(&steps), m.logit(&steps));
    }
}
