//! Sieve-Streaming.
//!
//! Keeps one candidate set per guess `v` of the optimum on the geometric grid
//! `{(1+eps)^i}` restricted to `[m, 2Km]`, where `m` is the largest singleton
//! value seen so far. A set `S_v` takes `e` when it has room and
//! `f(e | S_v) >= (v/2 - f(S_v)) / (K - |S_v|)`.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::objective::{ObjectiveSpec, Selection};
use crate::sample::Sample;

use super::engine::{best_of, Engine, SelectorOptions};
use super::grid::threshold_grid;
use super::SelectionResult;

#[derive(Debug)]
pub(crate) struct Sieve {
    pub threshold: f64,
    pub selection: Selection,
}

pub(crate) fn stored(sieves: &BTreeMap<i32, Sieve>) -> usize {
    sieves.values().map(|s| s.selection.len()).sum()
}

#[derive(Debug)]
pub struct SieveStreaming {
    engine: Engine,
    k: usize,
    base: f64,
    max_singleton: f64,
    sieves: BTreeMap<i32, Sieve>,
}

impl SieveStreaming {
    pub fn new(spec: &ObjectiveSpec, k: usize, epsilon: f64, options: SelectorOptions) -> Result<Self> {
        Ok(SieveStreaming {
            engine: Engine::new(spec, options)?,
            k,
            base: 1.0 + epsilon,
            max_singleton: 0.0,
            sieves: BTreeMap::new(),
        })
    }

    /// Live guesses of the optimum, ascending.
    pub fn thresholds(&self) -> Vec<f64> {
        self.sieves.values().map(|s| s.threshold).collect()
    }

    pub fn stored(&self) -> usize {
        stored(&self.sieves)
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        let item = self.engine.admit(sample)?;
        let single = self.engine.singleton(&item)?;
        if single > self.max_singleton {
            self.max_singleton = single;
            let m = single;
            let levels = threshold_grid(m, 2.0 * self.k as f64 * m, self.base);
            self.sieves.retain(|l, _| levels.contains(l));
            for level in levels {
                self.sieves.entry(level).or_insert_with(|| Sieve {
                    threshold: self.base.powi(level),
                    selection: self.engine.objective.empty_selection(),
                });
            }
        }
        let k = self.k;
        for sieve in self.sieves.values_mut() {
            let n = sieve.selection.len();
            if n >= k {
                continue;
            }
            let gain = self.engine.gain(&sieve.selection, &item)?;
            let needed = (sieve.threshold / 2.0 - sieve.selection.value()) / (k - n) as f64;
            if self.engine.accepts(&gain, needed) {
                self.engine.commit(&mut sieve.selection, item.clone(), gain)?;
            }
        }
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
