mod common;

use std::sync::Arc;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use sievestream::objective::{
    entropy, kernel, objective_gain, objective_value, DiversityState, KernelCache, KernelKind, KernelSpec, Objective,
};
use sievestream::Sample;

fn kinds() -> impl Strategy<Value = KernelKind> {
    prop::sample::select(KernelKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kernels_match_formulas(seed in any::<u64>(), kind in kinds(), beta in 0.1f64..3.0) {
        let pool = random_pool(&mut rng(seed), 2, 5, 4);
        let spec = KernelSpec::new(kind, beta);
        let got = kernel(&pool[0], &pool[1], &spec).unwrap();
        let want = oracle_kernel(&pool[0], &pool[1], &spec);
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
        prop_assert_eq!(got, kernel(&pool[1], &pool[0], &spec).unwrap());
    }

    #[test]
    fn entropy_matches_formula(seed in any::<u64>()) {
        let pool = random_pool(&mut rng(seed), 1, 1, 6);
        let p = pool[0].softmax.as_deref().unwrap();
        prop_assert!((entropy(p) - oracle_entropy(p)).abs() < 1e-12);
        prop_assert!(entropy(p) <= (6f64).ln() + 1e-12);
    }

    #[test]
    fn gram_matrices_are_psd(seed in any::<u64>(), kind in kinds(), n in 1usize..20) {
        let pool = random_pool(&mut rng(seed), n, 4, 4);
        let spec = KernelSpec::new(kind, 1.0);
        let g = DMatrix::from_fn(n, n, |i, j| kernel(&pool[i], &pool[j], &spec).unwrap());
        let min = g.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-9 * n as f64, "min eigenvalue {min}");
    }

    #[test]
    fn dense_value_matches_oracle(seed in any::<u64>(), kind in kinds(), n in 0usize..10,
                                  li in 0usize..3, ld in 1usize..3, alpha in 0.1f64..3.0) {
        let pool = random_pool(&mut rng(seed), n, 4, 4);
        let spec = spec(kind, li as f64 * 0.5, ld as f64 * 0.5, alpha);
        let got = objective_value(&pool, &spec).unwrap();
        let want = oracle_f(&pool.iter().collect::<Vec<_>>(), &spec);
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
        let mut reversed = pool.clone();
        reversed.reverse();
        prop_assert_eq!(objective_value(&reversed, &spec).unwrap(), got);
    }

    #[test]
    fn incremental_gains_match_oracle(seed in any::<u64>(), kind in kinds(), n in 1usize..16, alpha in 0.1f64..3.0) {
        let pool = random_pool(&mut rng(seed), n, 4, 4);
        let spec = spec(kind, 0.5, 1.0, alpha);
        let objective = Objective::new(spec).unwrap();
        let mut cache = KernelCache::new(true);
        let mut sel = objective.empty_selection();
        for (key, s) in pool.iter().enumerate() {
            let item = objective.item(key as u64, Arc::new(s.clone())).unwrap();
            let gain = objective_gain(&sel, &item, &objective, &mut cache).unwrap();
            let before = oracle_f(&pool[..key].iter().collect::<Vec<_>>(), &spec);
            let after = oracle_f(&pool[..=key].iter().collect::<Vec<_>>(), &spec);
            prop_assert!((gain.total - (after - before)).abs() <= 1e-9 * after.abs().max(1.0));
            prop_assert!(gain.total >= -1e-12);
            sel.commit(item, gain).unwrap();
            prop_assert!((sel.value() - after).abs() <= 1e-9 * after.abs().max(1.0));
            cache.clear();
        }
        sel.audit(&spec, 1e-9).unwrap();
    }
}

/// Maintained log-det and inverse against dense LU over random commit orders.
#[test]
fn inverse_and_logdet_track_dense() {
    let mut r = rng(11);
    for case in 0..60 {
        let kind = KernelKind::ALL[case % 4];
        let alpha = [0.5, 1.0, 2.0][case % 3];
        let n = 1 + case % 40;
        let pool = random_pool(&mut r, n, 6, 5);
        let spec = spec(kind, 0.0, 1.0, alpha);
        let mut state = DiversityState::new(alpha);
        for (key, s) in pool.iter().enumerate() {
            let sims: Vec<f64> = pool[..key].iter().map(|o| oracle_kernel(o, s, &spec.kernel)).collect();
            let probe = state.probe(&s.id, &sims, oracle_kernel(s, s, &spec.kernel)).unwrap();
            assert!(!probe.degenerate);
            state.commit(key as u64, &s.id, probe).unwrap();
        }
        let set: Vec<&Sample> = pool.iter().collect();
        let a = oracle_matrix(&set, &spec);
        let direct = a.clone().lu().determinant().ln();
        assert!((state.logdet() - direct).abs() <= 1e-8 * direct.abs().max(1.0));
        let inv = a.try_inverse().unwrap();
        for (i, v) in state.inverse().iter().enumerate() {
            assert!((v - inv[(i / n, i % n)]).abs() <= 1e-6);
        }
    }
}

/// An exact repeat under a unit-diagonal kernel adds `ln((1+2a)/(1+a)) / 2`:
/// the 2x2 determinant is `(1+a)^2 - a^2 = 1 + 2a`.
#[test]
fn exact_duplicate_keeps_positive_gain() {
    let pool = random_pool(&mut rng(3), 1, 4, 4);
    for kind in [KernelKind::RbfL1Raw, KernelKind::RbfL2Features, KernelKind::RbfJsdSoftmax] {
        for alpha in [0.5, 1.0, 2.0] {
            let spec = spec(kind, 0.0, 1.0, alpha);
            let objective = Objective::new(spec).unwrap();
            let mut cache = KernelCache::new(false);
            let mut sel = objective.empty_selection();
            let first = objective.item(0, Arc::new(pool[0].clone())).unwrap();
            let g = objective_gain(&sel, &first, &objective, &mut cache).unwrap();
            sel.commit(first, g).unwrap();
            let twin = Sample { id: "twin".into(), seq: 1, ..pool[0].clone() };
            let twin = objective.item(1, Arc::new(twin)).unwrap();
            let g = objective_gain(&sel, &twin, &objective, &mut cache).unwrap();
            let want = 0.5 * ((1.0 + 2.0 * alpha) / (1.0 + alpha)).ln();
            assert!((g.total - want).abs() < 1e-12, "{kind}: {} vs {want}", g.total);
            assert!(!g.degenerate());
        }
    }
}

/// A non-PSD similarity drives the Schur complement to zero; the probe clamps
/// instead of producing a non-finite gain, and committing it is refused.
#[test]
fn degenerate_pivot_is_clamped_and_refused() {
    let mut state = DiversityState::new(1.0);
    let p = state.probe("a", &[], 1.0).unwrap();
    state.commit(0, "a", p).unwrap();
    // a = 1 + 1 = 2, w = 2, u = 2/2 = 1, s = 2 - 2 = 0.
    let p = state.probe("b", &[2.0], 1.0).unwrap();
    assert!(p.degenerate && p.gain.is_finite());
    assert!(state.commit(1, "b", p).is_err());
}
