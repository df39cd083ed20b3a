//! Offline oracles over a fully materialised pool.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::objective::{objective_gain, objective_value_of, Gain, KernelCache, Objective, ObjectiveSpec};
use crate::sample::Sample;

use super::SelectionResult;

/// Upper limit on the number of subsets [`brute_force`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

fn distinct_ids(pool: &[Sample]) -> Result<()> {
    let mut seen = HashSet::with_capacity(pool.len());
    for s in pool {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::validation(&s.id, "duplicate id in pool"));
        }
    }
    Ok(())
}

struct Candidate {
    bound: f64,
    seq: u64,
    index: usize,
    /// Selection size the bound was computed at.
    stamp: usize,
    gain: Gain,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(other.seq.cmp(&self.seq))
            .then(other.index.cmp(&self.index))
    }
}

/// Lazy greedy: marginal gains only shrink as the set grows, so a stale gain
/// is an upper bound and only the heap top needs re-evaluation.
pub fn offline_greedy(pool: &[Sample], spec: &ObjectiveSpec, k: usize) -> Result<SelectionResult> {
    distinct_ids(pool)?;
    let objective = Objective::new(*spec)?;
    let mut cache = KernelCache::new(true);
    let mut selection = objective.empty_selection();
    let mut items = Vec::with_capacity(pool.len());
    let mut heap = BinaryHeap::with_capacity(pool.len());
    let mut evaluations = 0u64;
    for (i, s) in pool.iter().enumerate() {
        s.validate()?;
        let item = objective.item(i as u64, Arc::new(s.clone()))?;
        let gain = objective_gain(&selection, &item, &objective, &mut cache)?;
        evaluations += 1;
        if !gain.degenerate() {
            heap.push(Candidate {
                bound: gain.total,
                seq: s.seq,
                index: i,
                stamp: 0,
                gain,
            });
        }
        items.push(item);
    }
    while selection.len() < k {
        let Some(top) = heap.pop() else { break };
        if top.stamp == selection.len() {
            if top.bound <= 0.0 {
                break;
            }
            selection.commit(items[top.index].clone(), top.gain)?;
            continue;
        }
        let gain = objective_gain(&selection, &items[top.index], &objective, &mut cache)?;
        evaluations += 1;
        if gain.degenerate() {
            continue;
        }
        heap.push(Candidate {
            bound: gain.total,
            stamp: selection.len(),
            gain,
            ..top
        });
    }
    let mut chosen = selection.samples();
    chosen.sort_by_key(|s| s.seq);
    Ok(SelectionResult {
        chosen,
        value: selection.value(),
        samples_seen: pool.len() as u64,
        stored_peak: pool.len(),
        gain_evaluations: evaluations,
        kernel_evaluations: cache.evaluations(),
        cache_hits: cache.hits(),
    })
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Exact maximiser of `f` over all subsets of size at most `k`.
///
/// Ties go to the lexicographically smallest sorted id list.
pub fn brute_force(pool: &[Sample], spec: &ObjectiveSpec, k: usize) -> Result<SelectionResult> {
    distinct_ids(pool)?;
    spec.validate()?;
    let n = pool.len();
    let top = k.min(n);
    let subsets: u128 = (0..=top).map(|j| binomial(n as u128, j as u128)).sum();
    if subsets > BRUTE_FORCE_LIMIT {
        return Err(Error::Budget {
            subsets,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    for s in pool {
        s.validate()?;
    }
    let mut best: (f64, Vec<&str>, Vec<usize>) = (0.0, Vec::new(), Vec::new());
    let mut evaluations = 0u64;
    for size in 1..=top {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let members: Vec<&Sample> = idx.iter().map(|&i| &pool[i]).collect();
            let value = objective_value_of(members, spec)?;
            evaluations += 1;
            let sorted_ids = || {
                let mut ids: Vec<&str> = idx.iter().map(|&i| pool[i].id.as_str()).collect();
                ids.sort_unstable();
                ids
            };
            let replace = match value.total_cmp(&best.0) {
                Ordering::Greater => Some(sorted_ids()),
                Ordering::Less => None,
                Ordering::Equal => Some(sorted_ids()).filter(|ids| *ids < best.1),
            };
            if let Some(ids) = replace {
                best = (value, ids, idx.clone());
            }
            // next combination in lexicographic order
            let mut i = size;
            while i > 0 && idx[i - 1] == n - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    let mut chosen: Vec<Sample> = best.2.iter().map(|&i| pool[i].clone()).collect();
    chosen.sort_by_key(|s| s.seq);
    Ok(SelectionResult {
        chosen,
        value: best.0,
        samples_seen: n as u64,
        stored_peak: n,
        gain_evaluations: evaluations,
        kernel_evaluations: 0,
        cache_hits: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{Informativeness, KernelKind, KernelSpec};

    fn scored(scores: &[f64]) -> Vec<Sample> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| Sample::new(format!("s{i}"), i as u64).with_score(s))
            .collect()
    }

    #[test]
    fn brute_force_trivial() {
        let spec = ObjectiveSpec::modular(Informativeness::PrecomputedScore);
        let r = brute_force(&scored(&[2.5]), &spec, 3).unwrap();
        assert_eq!(r.chosen_ids(), vec!["s0"]);
        let r = brute_force(&scored(&[3.0, 1.0, 2.0]), &spec, 2).unwrap();
        assert_eq!(r.value, 5.0);
        assert_eq!(r.chosen_ids(), vec!["s0", "s2"]);
        let r = brute_force(&[], &spec, 2).unwrap();
        assert!(r.chosen.is_empty());
    }

    #[test]
    fn brute_force_budget() {
        let spec = ObjectiveSpec::modular(Informativeness::PrecomputedScore);
        let pool = scored(&vec![1.0; 60]);
        assert!(matches!(
            brute_force(&pool, &spec, 5),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn brute_force_tie_break_is_lexicographic() {
        let spec = ObjectiveSpec::modular(Informativeness::PrecomputedScore);
        let pool = vec![
            Sample::new("b", 0).with_score(1.0),
            Sample::new("a", 1).with_score(1.0),
            Sample::new("c", 2).with_score(1.0),
        ];
        let r = brute_force(&pool, &spec, 2).unwrap();
        let mut ids = r.chosen_ids();
        ids.sort();
        assert_eq!(ids, vec!["a", "b"]);
    }

    #[test]
    fn greedy_modular_is_exact() {
        let spec = ObjectiveSpec::modular(Informativeness::PrecomputedScore);
        let pool = scored(&[0.3, 4.0, 1.5, 4.0, 0.0, 2.2]);
        let g = offline_greedy(&pool, &spec, 3).unwrap();
        let b = brute_force(&pool, &spec, 3).unwrap();
        assert_eq!(g.value, b.value);
        assert_eq!(g.chosen_ids(), vec!["s1", "s3", "s5"]);
    }

    #[test]
    fn greedy_on_identical_pool_has_shrinking_gains() {
        // k = 1 everywhere: det(I + alpha * J_n) = 1 + n * alpha.
        let spec = ObjectiveSpec {
            lambda_i: 0.0,
            lambda_d: 1.0,
            alpha: 1.0,
            informativeness: Informativeness::SoftmaxEntropy,
            kernel: KernelSpec::new(KernelKind::PolynomialFeatures, 1.0),
        };
        let pool: Vec<Sample> = (0..6)
            .map(|i| Sample::new(format!("d{i}"), i).with_features(vec![1.0]))
            .collect();
        for k in 1..=4 {
            let g = offline_greedy(&pool, &spec, k).unwrap();
            assert_eq!(g.chosen.len(), k);
            assert!((g.value - 0.5 * (1.0 + k as f64).ln()).abs() < 1e-12);
        }
        // greedy picks the earliest duplicate first
        assert_eq!(offline_greedy(&pool, &spec, 1).unwrap().chosen_ids(), vec!["d0"]);
    }
}
