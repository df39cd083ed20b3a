//! Positive-semidefinite similarity kernels over sample representations.
//!
//! Every formula below is symmetric term by term, so `k(a, b)` and `k(b, a)`
//! agree bit for bit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `<f(a), f(b)>` over feature vectors.
    PolynomialFeatures,
    /// `exp(-beta * |a - b|_1)` over the raw representation.
    RbfL1Raw,
    /// `exp(-beta * |f(a) - f(b)|_2)` over feature vectors.
    RbfL2Features,
    /// `exp(-beta * JSD(p(a) || p(b)))` over softmax vectors.
    RbfJsdSoftmax,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] = [
        KernelKind::PolynomialFeatures,
        KernelKind::RbfL1Raw,
        KernelKind::RbfL2Features,
        KernelKind::RbfJsdSoftmax,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::PolynomialFeatures => "polynomial-features",
            KernelKind::RbfL1Raw => "rbf-l1-raw",
            KernelKind::RbfL2Features => "rbf-l2-features",
            KernelKind::RbfJsdSoftmax => "rbf-jsd-softmax",
        }
    }

    pub fn uses_softmax(self) -> bool {
        matches!(self, KernelKind::RbfJsdSoftmax)
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown kernel kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Scale inside the RBF kernels; ignored by the polynomial kernel.
    pub beta: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, beta: f64) -> Self {
        KernelSpec { kind, beta }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Config(format!(
                "kernel beta must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

fn vectors<'a>(a: &'a Sample, b: &'a Sample, softmax: bool) -> Result<(&'a [f64], &'a [f64])> {
    let field = if softmax { "softmax" } else { "features" };
    let pick = |s: &'a Sample| {
        let v = if softmax { &s.softmax } else { &s.features };
        v.as_deref().ok_or_else(|| Error::MissingField {
            id: s.id.clone(),
            field,
        })
    };
    let (x, y) = (pick(a)?, pick(b)?);
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok((x, y))
}

fn finite_or_err(v: f64, a: &Sample, b: &Sample) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numeric(
            format!("{},{}", a.id, b.id),
            "kernel value is not finite",
        ))
    }
}

/// Evaluates the similarity of two samples.
pub fn kernel(a: &Sample, b: &Sample, spec: &KernelSpec) -> Result<f64> {
    let (x, y) = vectors(a, b, spec.kind.uses_softmax())?;
    let v = match spec.kind {
        KernelKind::PolynomialFeatures => x.iter().zip(y).map(|(p, q)| p * q).sum(),
        KernelKind::RbfL1Raw => {
            let d: f64 = x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum();
            (-spec.beta * d).exp()
        }
        KernelKind::RbfL2Features => {
            let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
            (-spec.beta * d2.sqrt()).exp()
        }
        KernelKind::RbfJsdSoftmax => (-spec.beta * jensen_shannon(x, y)).exp(),
    };
    finite_or_err(v, a, b)
}

/// Jensen-Shannon divergence in nats.
pub fn jensen_shannon(p: &[f64], q: &[f64]) -> f64 {
    fn term(x: f64, m: f64) -> f64 {
        if x > 0.0 {
            x * (x / m).ln()
        } else {
            0.0
        }
    }
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        acc += term(a, m) + term(b, m);
    }
    (0.5 * acc).max(0.0)
}
