//! LOBSTER file IO, benchmark orchestration and report emission on top of
//! `lobbench-core`.

pub mod config;
pub mod emit;
pub mod lobster;
pub mod model_io;
pub mod report;

pub use config::RunConfig;
pub use report::{run, BenchmarkReport, BenchmarkRun, RunError};
