//! Discriminator training: stratified split, standardisation, Adam.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::encode::DeltaStep;
use super::model::{self, Architecture, Discriminator, Workspace, CHANNELS, POOLED_FEATURES};
use super::{roc::roc_auc, AdversarialError};
use crate::math;
use crate::stats;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub architecture: Architecture,
    /// Steps per window.
    pub window: usize,
    pub filters: usize,
    pub kernel_width: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            architecture: Architecture::ConvAttention,
            window: 100,
            filters: 16,
            kernel_width: 5,
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 32,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

pub const MIN_WINDOWS_PER_CLASS: usize = 10;

/// Logit of one input window.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoredWindow {
    /// `true` for real data.
    pub label: bool,
    /// Position in the real or generated input slice.
    pub index: usize,
    pub logit: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Discriminator,
    /// Mean loss of the untrained model on the training set.
    pub initial_loss: f64,
    /// Mean loss over each epoch's batches (before each update).
    pub epoch_losses: Vec<f64>,
    pub train_auc: f64,
    pub test_auc: f64,
    pub train: Vec<ScoredWindow>,
    pub test: Vec<ScoredWindow>,
}

fn bce(logit: f64, label: bool) -> f64 {
    if label {
        math::softplus(-logit)
    } else {
        math::softplus(logit)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam { m: alloc::vec![0.0; n], v: alloc::vec![0.0; n], t: 0, lr }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(Self::B1, f64::from(self.t));
        let c2 = 1.0 - libm::pow(Self::B2, f64::from(self.t));
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (math::sqrt(vh) + Self::EPS);
        }
    }
}

fn split_class(n: usize, fraction: f64, rng: &mut stats::Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_test = (math::round(n as f64 * fraction) as usize).clamp(1, n - 1);
    let test = idx[..n_test].to_vec();
    let train = idx[n_test..].to_vec();
    (train, test)
}

fn safe_std(s: f64) -> f64 {
    if s > 1e-12 && s.is_finite() {
        s
    } else {
        1.0
    }
}

/// Trains a real-vs-generated classifier on fixed-length windows (shorter
/// windows are zero-padded, longer ones truncated).
pub fn train(real: &[Vec<DeltaStep>], gen: &[Vec<DeltaStep>], cfg: &TrainConfig) -> Result<TrainOutcome, AdversarialError> {
    if real.len() < MIN_WINDOWS_PER_CLASS || gen.len() < MIN_WINDOWS_PER_CLASS {
        return Err(AdversarialError::TooFewWindows { real: real.len(), gen: gen.len(), need: MIN_WINDOWS_PER_CLASS });
    }
    if cfg.window == 0 || cfg.batch_size == 0 || cfg.filters == 0 || cfg.kernel_width == 0 {
        return Err(AdversarialError::Config("window, batch size, filters and kernel width must be positive"));
    }
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(AdversarialError::Config("test fraction must lie in (0, 1)"));
    }
    let mut rng = stats::rng_from(cfg.seed, "discriminator");
    let (real_train, real_test) = split_class(real.len(), cfg.test_fraction, &mut rng);
    let (gen_train, gen_test) = split_class(gen.len(), cfg.test_fraction, &mut rng);

    let window_of = |label: bool, i: usize| if label { &real[i] } else { &gen[i] };
    let mut train_set: Vec<(bool, usize)> = real_train.iter().map(|&i| (true, i)).collect();
    train_set.extend(gen_train.iter().map(|&i| (false, i)));
    let mut test_set: Vec<(bool, usize)> = real_test.iter().map(|&i| (true, i)).collect();
    test_set.extend(gen_test.iter().map(|&i| (false, i)));

    // per-channel input moments over training windows
    let mut sum = [0.0; CHANNELS];
    let mut sq = [0.0; CHANNELS];
    let mut count = 0.0;
    for &(l, i) in &train_set {
        for s in model_window(window_of(l, i), cfg.window) {
            let ch = s.channels();
            for c in 0..CHANNELS {
                sum[c] += ch[c];
                sq[c] += ch[c] * ch[c];
            }
            count += 1.0;
        }
    }
    let mut input_mean = [0.0; CHANNELS];
    let mut input_std = [1.0; CHANNELS];
    for c in 0..CHANNELS {
        input_mean[c] = sum[c] / count;
        input_std[c] = safe_std(math::sqrt((sq[c] / count - input_mean[c] * input_mean[c]).max(0.0)));
    }

    let mut disc = Discriminator {
        arch: cfg.architecture,
        window: cfg.window,
        filters: cfg.filters,
        width: cfg.kernel_width,
        input_mean,
        input_std,
        feature_mean: Vec::new(),
        feature_std: Vec::new(),
        params: model::init_params(cfg.architecture, cfg.filters, cfg.kernel_width, &mut rng),
    };
    let inputs: Vec<Vec<f64>> = train_set.iter().map(|&(l, i)| disc.prepare(window_of(l, i))).collect();
    if cfg.architecture == Architecture::PooledLogistic {
        let feats: Vec<[f64; POOLED_FEATURES]> = inputs.iter().map(|x| Discriminator::pooled_features(x)).collect();
        let n = feats.len() as f64;
        let mut fm = alloc::vec![0.0; POOLED_FEATURES];
        let mut fs = alloc::vec![0.0; POOLED_FEATURES];
        for f in &feats {
            for k in 0..POOLED_FEATURES {
                fm[k] += f[k] / n;
            }
        }
        for f in &feats {
            for k in 0..POOLED_FEATURES {
                fs[k] += (f[k] - fm[k]) * (f[k] - fm[k]) / n;
            }
        }
        disc.feature_std = fs.into_iter().map(|v| safe_std(math::sqrt(v))).collect();
        disc.feature_mean = fm;
    }

    let mut ws = Workspace::default();
    let initial_loss = inputs
        .iter()
        .zip(&train_set)
        .map(|(x, &(l, _))| bce(disc.forward(x, &mut ws), l))
        .sum::<f64>()
        / inputs.len() as f64;

    let mut adam = Adam::new(disc.params.len(), cfg.learning_rate);
    let mut grad = alloc::vec![0.0; disc.params.len()];
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &k in batch {
                let label = train_set[k].0;
                let z = disc.forward(&inputs[k], &mut ws);
                total += bce(z, label);
                let y = if label { 1.0 } else { 0.0 };
                disc.backward(&inputs[k], (math::sigmoid(z) - y) * scale, &mut ws, &mut grad);
            }
            adam.step(&mut disc.params, &grad);
        }
        let mean = total / inputs.len() as f64;
        if !mean.is_finite() || disc.params.iter().any(|p| !p.is_finite()) {
            return Err(AdversarialError::Diverged { epoch: epoch + 1, loss: mean });
        }
        epoch_losses.push(mean);
    }

    let score = |set: &[(bool, usize)]| -> Vec<ScoredWindow> {
        set.iter()
            .map(|&(label, index)| ScoredWindow { label, index, logit: disc.logit(window_of(label, index)) })
            .collect()
    };
    let train_scores = score(&train_set);
    let test_scores = score(&test_set);
    let auc = |s: &[ScoredWindow]| {
        let labels: Vec<bool> = s.iter().map(|w| w.label).collect();
        let logits: Vec<f64> = s.iter().map(|w| w.logit).collect();
        roc_auc(&labels, &logits)
    };
    Ok(TrainOutcome {
        initial_loss,
        epoch_losses,
        train_auc: auc(&train_scores)?,
        test_auc: auc(&test_scores)?,
        train: train_scores,
        test: test_scores,
        model: disc,
    })
}

fn model_window(steps: &[DeltaStep], len: usize) -> impl Iterator<Item = DeltaStep> + '_ {
    steps.iter().copied().chain(core::iter::repeat(DeltaStep::default())).take(len)
}

/// Logits of a trained model on arbitrary windows.
pub fn score(model: &Discriminator, windows: &[Vec<DeltaStep>]) -> Vec<f64> {
    windows.iter().map(|w| model.logit(w)).collect()
}
