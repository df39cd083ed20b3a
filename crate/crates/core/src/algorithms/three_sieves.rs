//! ThreeSieves.
//!
//! A single candidate set with one guess `v` of the optimum, initially the
//! largest grid point not above `K * m` (`m` the best singleton seen). An item
//! is taken when `f(e | S) >= (v/2 - f(S)) / (K - |S|)`. After `T` consecutive
//! rejections the guess steps down one grid level; a new best singleton resets
//! the guess to the top of the grid.

use crate::error::Result;
use crate::objective::{ObjectiveSpec, Selection};
use crate::sample::Sample;

use super::engine::{Engine, SelectorOptions};
use super::grid::{level_at_least, level_at_most};
use super::SelectionResult;

#[derive(Debug)]
pub struct ThreeSieves {
    engine: Engine,
    k: usize,
    base: f64,
    budget: usize,
    max_singleton: f64,
    level: Option<i32>,
    rejections: usize,
    selection: Selection,
}

impl ThreeSieves {
    pub fn new(
        spec: &ObjectiveSpec,
        k: usize,
        epsilon: f64,
        budget: usize,
        options: SelectorOptions,
    ) -> Result<Self> {
        Self::with_base(spec, k, 1.0 + epsilon, budget, options)
    }

    pub(crate) fn with_base(
        spec: &ObjectiveSpec,
        k: usize,
        base: f64,
        budget: usize,
        options: SelectorOptions,
    ) -> Result<Self> {
        let engine = Engine::new(spec, options)?;
        let selection = engine.objective.empty_selection();
        Ok(ThreeSieves {
            engine,
            k,
            base,
            budget,
            max_singleton: 0.0,
            level: None,
            rejections: 0,
            selection,
        })
    }

    /// Current guess of the optimum.
    pub fn guess(&self) -> Option<f64> {
        self.level.map(|l| self.base.powi(l))
    }

    pub fn stored(&self) -> usize {
        self.selection.len()
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        let item = self.engine.admit(sample)?;
        let single = self.engine.singleton(&item)?;
        if single > self.max_singleton {
            self.max_singleton = single;
            self.level = Some(level_at_most(self.k as f64 * single, self.base));
            self.rejections = 0;
        }
        let n = self.selection.len();
        if let (Some(level), true) = (self.level, n < self.k) {
            let v = self.base.powi(level);
            let needed = (v / 2.0 - self.selection.value()) / (self.k - n) as f64;
            let gain = self.engine.gain(&self.selection, &item)?;
            if self.engine.accepts(&gain, needed) {
                self.engine.commit(&mut self.selection, item, gain)?;
                self.rejections = 0;
            } else {
                self.rejections += 1;
                if self.rejections >= self.budget {
                    // The grid ends at the smallest level not below m.
                    let floor = level_at_least(self.max_singleton, self.base).min(level);
                    self.level = Some((level - 1).max(floor));
                    self.rejections = 0;
                }
            }
        }
        let stored = self.stored();
        self.engine.end_item(stored);
        Ok(())
    }

    pub fn finish(self) -> Result<SelectionResult> {
        Ok(self
            .engine
            .result(self.selection.samples(), self.selection.value()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Informativeness;

    fn scored(scores: &[f64]) -> Vec<Sample> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| Sample::new(format!("s{i}"), i as u64).with_score(s))
            .collect()
    }

    #[test]
    fn descending_scores_hand_trace() {
        // m = 8 after the first item, so v = 16 on the base-2 grid:
        // 8 >= (8 - 0) / 2 is taken, then 4 >= (8 - 8) / 1 is taken.
        let spec = ObjectiveSpec::modular(Informativeness::PrecomputedScore);
        let mut ts = ThreeSieves::with_base(&spec, 2, 2.0, 1, SelectorOptions::default()).unwrap();
        let mut guesses = Vec::new();
        for s in scored(&[8.0, 4.0, 2.0, 1.0]) {
            ts.push(s).unwrap();
            guesses.push(ts.guess().unwrap());
        }
        assert_eq!(guesses, vec![16.0, 16.0, 16.0, 16.0]);
        let r = ts.finish().unwrap();
        assert_eq!(r.value, 12.0);
        assert_eq!(r.chosen_ids(), vec!["s0", "s1"]);
        assert_eq!(r.stored_peak, 2);
    }

    #[test]
    fn guess_steps_down_after_budget_rejections() {
        let spec = ObjectiveSpec::modular(Informativeness::PrecomputedScore);
        let mut ts = ThreeSieves::with_base(&spec, 4, 2.0, 2, SelectorOptions::default()).unwrap();
        ts.push(Sample::new("a", 0).with_score(4.0)).unwrap();
        // v = 16: a is taken since 4 >= 8/4.
        assert_eq!(ts.guess(), Some(16.0));
        // next need (8 - 4)/3 = 1.33; 1.0 is rejected twice -> v = 8.
        ts.push(Sample::new("b", 1).with_score(1.0)).unwrap();
        assert_eq!(ts.guess(), Some(16.0));
        ts.push(Sample::new("c", 2).with_score(1.0)).unwrap();
        assert_eq!(ts.guess(), Some(8.0));
        // need (4 - 4)/3 = 0: taken.
        ts.push(Sample::new("d", 3).with_score(1.0)).unwrap();
        let r = ts.finish().unwrap();
        assert_eq!(r.chosen_ids(), vec!["a", "d"]);
    }
}
