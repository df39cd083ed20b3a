use std::sync::Arc;

use crate::error::Result;
use crate::objective::{objective_gain, Gain, Item, KernelCache, Objective, ObjectiveSpec, Selection};
use crate::sample::Sample;

use super::SelectionResult;

/// Tuning switches that never change what a correct selector returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectorOptions {
    /// Memoise kernel values across sieves while one candidate is processed.
    pub cache: bool,
    /// Recompute every sieve value densely after each commit.
    pub audit: bool,
    /// Inverts the sieve acceptance rule. Exists only to check that the
    /// verification suite notices a broken selector.
    #[doc(hidden)]
    pub fault_injection: bool,
}

impl Default for SelectorOptions {
    fn default() -> Self {
        SelectorOptions {
            cache: true,
            audit: false,
            fault_injection: false,
        }
    }
}

/// Bookkeeping shared by every streaming selector.
#[derive(Debug)]
pub(crate) struct Engine {
    pub objective: Objective,
    pub cache: KernelCache,
    pub options: SelectorOptions,
    pub samples_seen: u64,
    pub gain_evaluations: u64,
    pub stored_peak: usize,
}

impl Engine {
    pub fn new(spec: &ObjectiveSpec, options: SelectorOptions) -> Result<Self> {
        Ok(Engine {
            objective: Objective::new(*spec)?,
            cache: KernelCache::new(options.cache),
            options,
            samples_seen: 0,
            gain_evaluations: 0,
            stored_peak: 0,
        })
    }

    pub fn admit(&mut self, sample: Sample) -> Result<Item> {
        sample.validate()?;
        let key = self.samples_seen;
        self.samples_seen += 1;
        self.objective.item(key, Arc::new(sample))
    }

    pub fn singleton(&mut self, item: &Item) -> Result<f64> {
        self.gain_evaluations += 1;
        self.objective.singleton_value(item, &mut self.cache)
    }

    pub fn gain(&mut self, selection: &Selection, item: &Item) -> Result<Gain> {
        self.gain_evaluations += 1;
        objective_gain(selection, item, &self.objective, &mut self.cache)
    }

    pub fn accepts(&self, gain: &Gain, needed: f64) -> bool {
        if gain.degenerate() {
            return false;
        }
        if self.options.fault_injection {
            gain.total < needed
        } else {
            gain.total >= needed
        }
    }

    pub fn commit(&self, selection: &mut Selection, item: Item, gain: Gain) -> Result<()> {
        selection.commit(item, gain)?;
        if self.options.audit {
            selection.audit(self.objective.spec(), 1e-8)?;
        }
        Ok(())
    }

    /// Ends processing of one stream item.
    pub fn end_item(&mut self, stored: usize) {
        self.cache.clear();
        self.stored_peak = self.stored_peak.max(stored);
    }

    pub fn result(&self, mut chosen: Vec<Sample>, value: f64) -> SelectionResult {
        chosen.sort_by_key(|s| s.seq);
        SelectionResult {
            chosen,
            value,
            samples_seen: self.samples_seen,
            stored_peak: self.stored_peak,
            gain_evaluations: self.gain_evaluations,
            kernel_evaluations: self.cache.evaluations(),
            cache_hits: self.cache.hits(),
        }
    }
}

/// Index of the best selection: highest value, first one on ties.
pub(crate) fn best_of<'a>(sets: impl Iterator<Item = &'a Selection>) -> Option<&'a Selection> {
    let mut best: Option<&Selection> = None;
    for s in sets {
        if best.is_none_or(|b| s.value() > b.value()) {
            best = Some(s);
        }
    }
    best
}
