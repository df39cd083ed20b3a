//! Per-sample processing time over a grid of budgets and epsilons.
//!
//! Only the direction of the trends is meaningful; absolute times depend on
//! the machine.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{mean_stderr, timed_select, ExperimentConfig};
use crate::algorithms::{Algorithm, SelectorConfig};
use crate::error::{Error, Result};
use crate::sample::Sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedCell {
    pub algorithm: Algorithm,
    pub k: usize,
    pub epsilon: Option<f64>,
    pub samples: usize,
    /// Seconds per sample.
    pub mean: f64,
    pub stderr: f64,
    pub gain_evaluations: u64,
    pub kernel_evaluations: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpeedTable {
    pub cells: Vec<SpeedCell>,
}

impl SpeedTable {
    pub fn cell(&self, algorithm: Algorithm, k: usize, epsilon: Option<f64>) -> Option<&SpeedCell> {
        self.cells
            .iter()
            .find(|c| c.algorithm == algorithm && c.k == k && c.epsilon == epsilon)
    }

    /// Sieve-algorithm cells where time grows with epsilon or shrinks with K.
    pub fn trend_violations(&self, algorithm: Algorithm) -> Vec<String> {
        let cells: Vec<&SpeedCell> = self
            .cells
            .iter()
            .filter(|c| c.algorithm == algorithm && c.epsilon.is_some())
            .collect();
        let mut by_k: BTreeMap<usize, Vec<&SpeedCell>> = BTreeMap::new();
        let mut by_eps: BTreeMap<u64, Vec<&SpeedCell>> = BTreeMap::new();
        for c in &cells {
            by_k.entry(c.k).or_default().push(c);
            by_eps.entry(c.epsilon.unwrap_or_default().to_bits()).or_default().push(c);
        }
        let mut out = Vec::new();
        for (k, mut row) in by_k {
            row.sort_by(|a, b| a.epsilon.partial_cmp(&b.epsilon).unwrap());
            for w in row.windows(2) {
                if w[1].mean > w[0].mean {
                    out.push(format!(
                        "{algorithm} k={k}: eps {} took {:.3e}s/sample, more than eps {} at {:.3e}s",
                        w[1].epsilon.unwrap_or_default(),
                        w[1].mean,
                        w[0].epsilon.unwrap_or_default(),
                        w[0].mean
                    ));
                }
            }
        }
        for (_, mut col) in by_eps {
            col.sort_by_key(|c| c.k);
            for w in col.windows(2) {
                if w[1].mean < w[0].mean {
                    out.push(format!(
                        "{algorithm} eps={}: k {} took {:.3e}s/sample, less than k {} at {:.3e}s",
                        w[0].epsilon.unwrap_or_default(),
                        w[1].k,
                        w[1].mean,
                        w[0].k,
                        w[0].mean
                    ));
                }
            }
        }
        out
    }
}

/// Times each configured algorithm at every budget in `ks` (its own budget
/// when `ks` is empty) on the first `iterations` samples of the first seed's
/// rounds. Each round segment gets a fresh selector. Runs single-threaded.
pub fn measure_speed(cfg: &ExperimentConfig, ks: &[usize], iterations: usize) -> Result<SpeedTable> {
    cfg.validate()?;
    if iterations < 100 {
        return Err(Error::Config(format!(
            "speed measurement needs at least 100 iterations, got {iterations}"
        )));
    }
    let seed = cfg.seeds[0];
    let mut segments: Vec<Vec<Sample>> = Vec::new();
    let mut total = 0;
    for round in 0..cfg.source.rounds() {
        if total >= iterations {
            break;
        }
        let mut seg: Vec<Sample> = cfg
            .source
            .round(seed, round)?
            .into_iter()
            .map(|r| r.sample)
            .collect();
        seg.truncate(iterations - total);
        total += seg.len();
        segments.push(seg);
    }

    let mut table = SpeedTable::default();
    for a in &cfg.algorithms {
        let budgets: Vec<usize> = if ks.is_empty() { vec![a.k] } else { ks.to_vec() };
        for &k in &budgets {
            let sel = SelectorConfig {
                k,
                seed: a.seed.map(|_| seed),
                ..*a
            };
            let mut latencies = Vec::with_capacity(total);
            let (mut gains, mut kernels) = (0, 0);
            for seg in &segments {
                let r = timed_select(seg, &cfg.objective, &sel, cfg.options(), &mut latencies)?;
                gains += r.gain_evaluations;
                kernels += r.kernel_evaluations;
            }
            let (mean, stderr) = mean_stderr(&latencies).unwrap_or_default();
            table.cells.push(SpeedCell {
                algorithm: a.algorithm,
                k,
                epsilon: a.epsilon,
                samples: latencies.len(),
                mean,
                stderr,
                gain_evaluations: gains,
                kernel_evaluations: kernels,
            });
        }
    }
    Ok(table)
}
