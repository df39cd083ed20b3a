//! Sieve-Streaming++.
//!
//! Each sieve carries a marginal-gain threshold `tau` on the grid
//! `{(1+eps)^i}` and takes `e` when it has room and `f(e | S_tau) >= tau`.
//! Live thresholds are kept in `[tau_min / (1+eps), Delta]` where `Delta` is
//! the largest singleton value seen and `tau_min = max(LB, Delta) / (2K)` with
//! `LB` the best sieve value so far. Because `LB` only grows, low-threshold
//! sieves are pruned for good, which bounds the stored samples by `O(K/eps)`.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::objective::ObjectiveSpec;
use crate::sample::Sample;

use super::engine::{best_of, Engine, SelectorOptions};
use super::grid::threshold_grid;
use super::sieve_streaming::{stored, Sieve};
use super::SelectionResult;

#[derive(Debug)]
pub struct SieveStreamingPp {
    engine: Engine,
    k: usize,
    base: f64,
    max_singleton: f64,
    lower_bound: f64,
    sieves: BTreeMap<i32, Sieve>,
}

impl SieveStreamingPp {
    pub fn new(spec: &ObjectiveSpec, k: usize, epsilon: f64, options: SelectorOptions) -> Result<Self> {
        Ok(SieveStreamingPp {
            engine: Engine::new(spec, options)?,
            k,
            base: 1.0 + epsilon,
            max_singleton: 0.0,
            lower_bound: 0.0,
            sieves: BTreeMap::new(),
        })
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.sieves.values().map(|s| s.threshold).collect()
    }

    pub fn live_sieves(&self) -> usize {
        self.sieves.len()
    }

    pub fn stored(&self) -> usize {
        stored(&self.sieves)
    }

    fn tau_min(&self) -> f64 {
        self.lower_bound.max(self.max_singleton) / (2.0 * self.k as f64)
    }

    fn prune(&mut self) {
        let floor = self.tau_min() / self.base;
        self.sieves.retain(|_, s| s.threshold >= floor);
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        let item = self.engine.admit(sample)?;
        let single = self.engine.singleton(&item)?;
        self.max_singleton = self.max_singleton.max(single);
        self.prune();
        for level in threshold_grid(self.tau_min() / self.base, self.max_singleton, self.base) {
            self.sieves.entry(level).or_insert_with(|| Sieve {
                threshold: self.base.powi(level),
                selection: self.engine.objective.empty_selection(),
            });
        }
        let k = self.k;
        for sieve in self.sieves.values_mut() {
            if sieve.selection.len() >= k {
                continue;
            }
            let gain = self.engine.gain(&sieve.selection, &item)?;
            if self.engine.accepts(&gain, sieve.threshold) {
                self.engine.commit(&mut sieve.selection, item.clone(), gain)?;
                self.lower_bound = self.lower_bound.max(sieve.selection.value());
            }
        }
        self.prune();
        let stored = self.stored();
        self.engine.end_item(stored);
        Ok(())
    }

    pub fn finish(self) -> Result<SelectionResult> {
        Ok(match best_of(self.sieves.values().map(|s| &s.selection)) {
            Some(best) => self.engine.result(best.samples(), best.value()),
            None => self.engine.result(Vec::new(), 0.0),
        })
    }
}
