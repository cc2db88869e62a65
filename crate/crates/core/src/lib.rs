//! Core algorithms for benchmarking generative limit-order-book models.
//!
//! Everything in this crate is pure computation over in-memory data and
//! builds under `#![no_std]` with `alloc`. File formats, the CLI and the
//! benchmark orchestrator live in the `lobbench` companion crate.
//!
//! Module map:
//! - [`types`]: LOBSTER messages, book snapshots, sequences and bundles.
//! - [`book`]: price-time-priority matching engine and replay.
//! - [`scoring`]: scalar scoring functions over (messages, books).
//! - [`divergence`]: L1 / Wasserstein-1 estimation, conditional and
//!   horizon divergences, bootstrap intervals and aggregates.
//! - [`impact`]: touch-event classification and mid-price response curves.
//! - [`adversarial`]: delta encoding, discriminator training and ROC/AUC.
//! - [`generator`]: stochastic order book simulator with empirical rates.
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod adversarial;
pub mod book;
pub mod divergence;
pub mod generator;
pub mod impact;
mod math;
pub mod scoring;
pub mod stats;
pub mod types;

pub use book::{OrderBook, ReplayOutput};
pub use divergence::{DivergenceResult, Metric};
pub use scoring::{ScoreContext, ScoreKind, ScoreSeries, ScoreSpec};
pub use types::{
    BookSnapshot, DatasetBundle, EventType, Level, Message, Nanos, Price, Qty, Role,
    SequencePair, Side,
};
