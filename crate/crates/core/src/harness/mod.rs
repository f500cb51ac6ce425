//! Experiment configuration, seeded sweeps, artifact emission and the claim
//! verification suites behind the `coverlab` CLI.

pub mod claims;
pub mod config;
pub mod experiment;
pub mod instance;
pub mod stats;
pub mod svg;

pub use claims::{verify_claims, ClaimRow, SUITES};
pub use config::ExperimentConfig;
pub use experiment::{run_experiment, ExperimentOutcome};

/// Thread pool honoring `COVERLAB_THREADS` (falls back to `fallback`, then
/// to rayon's default).
pub fn thread_pool(fallback: Option<usize>) -> crate::Result<rayon::ThreadPool> {
    let env = std::env::var("COVERLAB_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok());
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = env.or(fallback).filter(|&n| n > 0) {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| crate::Error::Config(format!("thread pool: {e}")))
}
