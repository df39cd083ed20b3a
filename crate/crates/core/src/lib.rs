//! One-pass batch selection from data streams.
//!
//! Each round, a selector sees a stream of samples exactly once and keeps at
//! most `K` of them, maximising a monotone submodular objective that adds a
//! per-sample informativeness score to a log-determinant diversity term.
//!
//! - [`objective`]: the set function, kernels, and the incremental evaluator.
//! - [`algorithms`]: Sieve-Streaming, Sieve-Streaming++, ThreeSieves, the
//!   random and top-K baselines, and offline oracles.
//! - [`simulator`]: synthetic streams with class imbalance, near-duplicate
//!   bursts, and non-object filler.
//! - [`harness`]: the multi-round protocol, divided budgets, guarantee
//!   verification, and timing.
//! - [`config`] and [`record`]: the flat key-value config and the JSON-lines
//!   record file.

pub mod algorithms;
pub mod config;
pub mod error;
pub mod harness;
pub mod objective;
pub mod record;
pub mod sample;
pub mod simulator;

pub use error::{Error, Result};
pub use sample::{Record, Sample};
