//! Adversarial scoring: delta encoding of book trajectories, a
//! real-vs-generated discriminator and ROC/AUC.

mod encode;
mod model;
mod roc;
mod train;

use thiserror::Error;

pub use encode::{diff, encode, fit_window, windows, DeltaStep, Encoding};
pub use model::{param_count, Architecture, Discriminator, CHANNELS, POOLED_FEATURES};
pub use roc::{roc_auc, roc_curve};
pub use train::{score, train, ScoredWindow, TrainConfig, TrainOutcome, MIN_WINDOWS_PER_CLASS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversarialError {
    #[error("AUC needs both classes present")]
    SingleClass,
    #[error("{0}")]
    Shape(&'static str),
    #[error("need at least {need} windows per class, got {real} real and {gen} generated")]
    TooFewWindows { real: usize, gen: usize, need: usize },
    #[error("invalid training config: {0}")]
    Config(&'static str),
    #[error("training diverged in epoch {epoch} (mean loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
}
