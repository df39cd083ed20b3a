//! Reference implementations written independently of the library: plain
//! formulas for entropy and kernels, LU for determinants and inverses.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sievestream::objective::{Informativeness, KernelKind, KernelSpec, ObjectiveSpec};
use sievestream::Sample;

pub fn oracle_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

pub fn oracle_kernel(a: &Sample, b: &Sample, spec: &KernelSpec) -> f64 {
    let fa = a.features.as_deref().unwrap_or(&[]);
    let fb = b.features.as_deref().unwrap_or(&[]);
    match spec.kind {
        KernelKind::PolynomialFeatures => fa.iter().zip(fb).map(|(x, y)| x * y).sum(),
        KernelKind::RbfL1Raw => {
            (-spec.beta * fa.iter().zip(fb).map(|(x, y)| (x - y).abs()).sum::<f64>()).exp()
        }
        KernelKind::RbfL2Features => {
            let d = fa.iter().zip(fb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            (-spec.beta * d).exp()
        }
        KernelKind::RbfJsdSoftmax => {
            let p = a.softmax.as_deref().unwrap();
            let q = b.softmax.as_deref().unwrap();
            let m: Vec<f64> = p.iter().zip(q).map(|(x, y)| 0.5 * (x + y)).collect();
            let jsd = 0.5 * kl(p, &m) + 0.5 * kl(q, &m);
            (-spec.beta * jsd).exp()
        }
    }
}

pub fn oracle_info(s: &Sample, spec: &ObjectiveSpec) -> f64 {
    match spec.informativeness {
        Informativeness::SoftmaxEntropy => oracle_entropy(s.softmax.as_deref().unwrap()),
        _ => s.score.unwrap(),
    }
}

/// `I + alpha * M` over `set` in the given order.
pub fn oracle_matrix(set: &[&Sample], spec: &ObjectiveSpec) -> DMatrix<f64> {
    let n = set.len();
    DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id + spec.alpha * oracle_kernel(set[i], set[j], &spec.kernel)
    })
}

pub fn oracle_logdet(set: &[&Sample], spec: &ObjectiveSpec) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    oracle_matrix(set, spec).lu().determinant().ln()
}

pub fn oracle_f(set: &[&Sample], spec: &ObjectiveSpec) -> f64 {
    let info: f64 = set.iter().map(|s| oracle_info(s, spec)).sum();
    spec.lambda_i * info + spec.lambda_d * 0.5 * oracle_logdet(set, spec)
}

/// Samples carrying softmax, features, and score, with distinct ids.
pub fn random_pool(rng: &mut ChaCha8Rng, n: usize, dim: usize, classes: usize) -> Vec<Sample> {
    (0..n)
        .map(|i| {
            let sharp: f64 = rng.random_range(0.0..4.0);
            let logits: Vec<f64> = (0..classes)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    sharp * z
                })
                .collect();
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            let features: Vec<f64> = (0..dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    z
                })
                .collect();
            Sample::new(format!("p{i:03}"), i as u64)
                .with_softmax(logits.iter().map(|l| l.exp() / z).collect())
                .with_features(features)
                .with_score(rng.random_range(0.0..2.0))
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn spec(kind: KernelKind, lambda_i: f64, lambda_d: f64, alpha: f64) -> ObjectiveSpec {
    ObjectiveSpec {
        lambda_i,
        lambda_d,
        alpha,
        informativeness: Informativeness::SoftmaxEntropy,
        kernel: KernelSpec::new(kind, 1.0),
    }
}

/// `(S, T, e)` with `S` a subset of `T` and `e` outside `T`, as pool indices.
pub fn nested_triple(rng: &mut ChaCha8Rng, n: usize) -> (Vec<usize>, Vec<usize>, usize) {
    let mut idx: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), rng);
    let e = idx[0];
    let t_len = rng.random_range(0..n);
    let t: Vec<usize> = idx[1..=t_len].to_vec();
    let s_len = rng.random_range(0..=t_len);
    let s = t[..s_len].to_vec();
    (s, t, e)
}

pub fn pick<'a>(pool: &'a [Sample], idx: &[usize]) -> Vec<&'a Sample> {
    idx.iter().map(|&i| &pool[i]).collect()
}

/// Stream of `blocks` contiguous blocks, each holding `strong` items with
/// one-hot features on dimensions no other item uses, plus `filler` items
/// with zero features and zero score at random positions. Under the
/// polynomial kernel the similarity matrix is diagonal, hence block-diagonal
/// along the block boundaries, and every strong item adds
/// `score + ln(1 + alpha) / 2` whatever else is chosen.
pub fn block_instance(rng: &mut ChaCha8Rng, blocks: usize, strong: usize, filler: usize) -> Vec<Sample> {
    let dim = blocks * strong;
    let mut out = Vec::new();
    for b in 0..blocks {
        let mut block: Vec<Option<usize>> = (0..strong).map(|j| Some(b * strong + j)).collect();
        block.extend(std::iter::repeat_n(None, filler));
        rand::seq::SliceRandom::shuffle(block.as_mut_slice(), rng);
        for slot in block {
            let seq = out.len() as u64;
            let s = match slot {
                Some(j) => {
                    let mut f = vec![0.0; dim];
                    f[j] = 1.0;
                    Sample::new(format!("b{b}-s{j:03}"), seq)
                        .with_features(f)
                        .with_score(rng.random_range(1.0..1.9))
                }
                None => Sample::new(format!("b{b}-f{seq:04}"), seq)
                    .with_features(vec![0.0; dim])
                    .with_score(0.0),
            };
            out.push(s);
        }
    }
    out
}

pub fn block_spec() -> ObjectiveSpec {
    ObjectiveSpec {
        lambda_i: 1.0,
        lambda_d: 1.0,
        alpha: 1.0,
        informativeness: Informativeness::PrecomputedScore,
        kernel: KernelSpec::new(KernelKind::PolynomialFeatures, 1.0),
    }
}
