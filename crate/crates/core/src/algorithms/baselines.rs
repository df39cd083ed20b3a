//! Stream baselines: a uniform reservoir and top-K by informativeness.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::objective::{informativeness, objective_value, Item, ObjectiveSpec};
use crate::sample::Sample;

use super::engine::{Engine, SelectorOptions};
use super::SelectionResult;

/// Uniform `K`-subset of the stream by reservoir sampling.
#[derive(Debug)]
pub struct RandomReservoir {
    engine: Engine,
    k: usize,
    rng: ChaCha8Rng,
    reservoir: Vec<Item>,
}

impl RandomReservoir {
    pub fn new(spec: &ObjectiveSpec, k: usize, seed: u64, options: SelectorOptions) -> Result<Self> {
        Ok(RandomReservoir {
            engine: Engine::new(spec, options)?,
            k,
            rng: ChaCha8Rng::seed_from_u64(seed),
            reservoir: Vec::with_capacity(k),
        })
    }

    pub fn stored(&self) -> usize {
        self.reservoir.len()
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        let seen = self.engine.samples_seen;
        let item = self.engine.admit(sample)?;
        if self.reservoir.len() < self.k {
            self.reservoir.push(item);
        } else {
            let j = self.rng.random_range(0..=seen);
            if (j as usize) < self.k {
                self.reservoir[j as usize] = item;
            }
        }
        self.engine.end_item(self.reservoir.len());
        Ok(())
    }

    pub fn finish(self) -> Result<SelectionResult> {
        let chosen: Vec<Sample> = self.reservoir.iter().map(|m| (*m.sample).clone()).collect();
        let value = objective_value(&chosen, self.engine.objective.spec())?;
        Ok(self.engine.result(chosen, value))
    }
}

/// Heap entry ordered so the worst kept item sits on top: lowest score, and
/// among equal scores the latest arrival.
#[derive(Debug)]
struct Ranked(Item);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .info
            .total_cmp(&self.0.info)
            .then(self.0.key.cmp(&other.0.key))
    }
}

/// Keeps the `K` most informative samples seen so far. Exact for the modular
/// objective; earlier items win ties.
#[derive(Debug)]
pub struct EntropyTopK {
    engine: Engine,
    k: usize,
    heap: BinaryHeap<Ranked>,
    scoring: ObjectiveSpec,
}

impl EntropyTopK {
    pub fn new(spec: &ObjectiveSpec, k: usize, options: SelectorOptions) -> Result<Self> {
        // Ranking always reads the informativeness, whatever lambda_i is.
        let scoring = ObjectiveSpec {
            lambda_i: 1.0,
            lambda_d: 0.0,
            ..*spec
        };
        Ok(EntropyTopK {
            engine: Engine::new(spec, options)?,
            k,
            heap: BinaryHeap::with_capacity(k + 1),
            scoring,
        })
    }

    pub fn stored(&self) -> usize {
        self.heap.len()
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        sample.validate()?;
        let key = self.engine.samples_seen;
        self.engine.samples_seen += 1;
        self.engine.gain_evaluations += 1;
        let info = informativeness(&sample, &self.scoring)?;
        let item = Item {
            key,
            sample: sample.into(),
            info,
        };
        if self.heap.len() < self.k {
            self.heap.push(Ranked(item));
        } else if self.heap.peek().is_some_and(|worst| info > worst.0.info) {
            self.heap.pop();
            self.heap.push(Ranked(item));
        }
        self.engine.end_item(self.heap.len());
        Ok(())
    }

    pub fn finish(self) -> Result<SelectionResult> {
        let chosen: Vec<Sample> = self.heap.iter().map(|r| (*r.0.sample).clone()).collect();
        let value = objective_value(&chosen, self.engine.objective.spec())?;
        Ok(self.engine.result(chosen, value))
    }
}
