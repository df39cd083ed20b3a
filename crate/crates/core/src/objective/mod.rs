//! The selection objective `f(S) = lambda_i * sum_{x in S} g(x) + lambda_d * 0.5 * log det(I + alpha * M_S)`.
//!
//! `g` is a per-sample informativeness score, so the first term is modular.
//! `M_S` is the kernel matrix of the set; for a positive-semidefinite kernel
//! the second term is monotone submodular, and so is `f`.
//!
//! Two evaluation paths exist: [`objective_value`] builds the dense matrix and
//! factorises it, while [`Selection`] tracks the set incrementally and yields
//! marginal gains in `O(|S|^2)` per candidate.

mod cache;
mod diversity;
mod kernel;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Sample;

pub use cache::KernelCache;
pub use diversity::{DiversityProbe, DiversityState, S_FLOOR};
pub use kernel::{jensen_shannon, kernel, KernelKind, KernelSpec};

/// Default trade-off between localization stability and classification
/// uncertainty in the detection score.
pub const DEFAULT_DETECTION_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Informativeness {
    /// Shannon entropy (nats) of the softmax vector.
    SoftmaxEntropy,
    /// The sample's `score` field as is.
    PrecomputedScore,
    /// `score` holds `lambda * (1 - S_I) + (1 - lambda) * U_C`, computed by the
    /// host detection pipeline before ingestion. `lambda` is recorded for
    /// provenance only.
    DetectionCombo { lambda: f64 },
}

impl Informativeness {
    pub fn name(&self) -> &'static str {
        match self {
            Informativeness::SoftmaxEntropy => "softmax-entropy",
            Informativeness::PrecomputedScore => "precomputed-score",
            Informativeness::DetectionCombo { .. } => "detection-combo",
        }
    }
}

impl fmt::Display for Informativeness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Informativeness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax-entropy" => Ok(Informativeness::SoftmaxEntropy),
            "precomputed-score" => Ok(Informativeness::PrecomputedScore),
            "detection-combo" => Ok(Informativeness::DetectionCombo {
                lambda: DEFAULT_DETECTION_LAMBDA,
            }),
            other => Err(Error::Config(format!("unknown informativeness `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub lambda_i: f64,
    pub lambda_d: f64,
    pub alpha: f64,
    pub informativeness: Informativeness,
    pub kernel: KernelSpec,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        ObjectiveSpec {
            lambda_i: 1.0,
            lambda_d: 1.0,
            alpha: 1.0,
            informativeness: Informativeness::SoftmaxEntropy,
            kernel: KernelSpec::new(KernelKind::PolynomialFeatures, 1.0),
        }
    }
}

impl ObjectiveSpec {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.lambda_i) || !nonneg(self.lambda_d) {
            return Err(Error::Config("lambda_i and lambda_d must be non-negative".into()));
        }
        if self.lambda_i + self.lambda_d <= 0.0 {
            return Err(Error::Config("lambda_i + lambda_d must be positive".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let Informativeness::DetectionCombo { lambda } = self.informativeness {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Error::Config(format!(
                    "detection lambda must lie in [0, 1], got {lambda}"
                )));
            }
        }
        self.kernel.validate()
    }

    /// Pure informativeness objective (no diversity term).
    pub fn modular(informativeness: Informativeness) -> Self {
        ObjectiveSpec {
            lambda_i: 1.0,
            lambda_d: 0.0,
            informativeness,
            ..Default::default()
        }
    }
}

/// Shannon entropy in nats with `0 * ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum::<f64>()
        .max(0.0)
}

/// Per-sample informativeness `g(x) >= 0`.
pub fn informativeness(sample: &Sample, spec: &ObjectiveSpec) -> Result<f64> {
    match spec.informativeness {
        Informativeness::SoftmaxEntropy => {
            let p = sample.softmax.as_deref().ok_or_else(|| Error::MissingField {
                id: sample.id.clone(),
                field: "softmax",
            })?;
            Ok(entropy(p))
        }
        Informativeness::PrecomputedScore | Informativeness::DetectionCombo { .. } => {
            let s = sample.score.ok_or_else(|| Error::MissingField {
                id: sample.id.clone(),
                field: "score",
            })?;
            if !s.is_finite() || s < 0.0 {
                return Err(Error::validation(
                    &sample.id,
                    format!("score must be finite and non-negative, got {s}"),
                ));
            }
            Ok(s)
        }
    }
}

/// Dense reference evaluation of `f` on a set of distinct samples.
///
/// Members are put in id order before summing and factorising, so the result
/// does not depend on the order of `set`.
pub fn objective_value(set: &[Sample], spec: &ObjectiveSpec) -> Result<f64> {
    objective_value_of(set.iter().collect(), spec)
}

pub(crate) fn objective_value_of(mut sorted: Vec<&Sample>, spec: &ObjectiveSpec) -> Result<f64> {
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::validation(&w[0].id, "duplicate id in set"));
    }
    let mut info = 0.0;
    if spec.lambda_i > 0.0 {
        for s in &sorted {
            info += informativeness(s, spec)?;
        }
    }
    let mut div = 0.0;
    if spec.lambda_d > 0.0 && !sorted.is_empty() {
        div = 0.5 * direct_logdet(&sorted, spec)?;
    }
    Ok(spec.lambda_i * info + spec.lambda_d * div)
}

/// `log det(I + alpha * M_S)` through a Cholesky factorisation.
fn direct_logdet(sorted: &[&Sample], spec: &ObjectiveSpec) -> Result<f64> {
    let n = sorted.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in i..n {
            let k = kernel(sorted[i], sorted[j], &spec.kernel)?;
            a[(i, j)] += spec.alpha * k;
            if i != j {
                a[(j, i)] += spec.alpha * k;
            }
        }
    }
    let chol = a.cholesky().ok_or_else(|| {
        Error::numeric(
            &sorted[0].id,
            "I + alpha*M is not positive definite; determinant cannot be evaluated",
        )
    })?;
    let l = chol.l_dirty();
    let logdet: f64 = (0..n).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    if !logdet.is_finite() {
        return Err(Error::numeric(&sorted[0].id, "log-determinant is not finite"));
    }
    Ok(logdet)
}

/// A stream item admitted to a selector: its arrival key, the shared sample,
/// and its cached informativeness.
#[derive(Debug, Clone)]
pub struct Item {
    pub key: u64,
    pub sample: Arc<Sample>,
    pub info: f64,
}

impl Item {
    pub fn id(&self) -> &str {
        &self.sample.id
    }
}

/// Validated objective.
#[derive(Debug, Clone)]
pub struct Objective {
    spec: ObjectiveSpec,
}

impl Objective {
    pub fn new(spec: ObjectiveSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Objective { spec })
    }

    pub fn spec(&self) -> &ObjectiveSpec {
        &self.spec
    }

    pub fn has_diversity(&self) -> bool {
        self.spec.lambda_d > 0.0
    }

    /// Wraps a sample, checking it carries what this objective reads.
    pub fn item(&self, key: u64, sample: Arc<Sample>) -> Result<Item> {
        let info = if self.spec.lambda_i > 0.0 {
            informativeness(&sample, &self.spec)?
        } else {
            0.0
        };
        if self.has_diversity() {
            let (present, field) = if self.spec.kernel.kind.uses_softmax() {
                (sample.softmax.is_some(), "softmax")
            } else {
                (sample.features.is_some(), "features")
            };
            if !present {
                return Err(Error::MissingField {
                    id: sample.id.clone(),
                    field,
                });
            }
        }
        Ok(Item { key, sample, info })
    }

    fn similarity(&self, a: &Item, b: &Item, cache: &mut KernelCache) -> Result<f64> {
        cache.get_or_compute(a.key, b.key, || kernel(&a.sample, &b.sample, &self.spec.kernel))
    }

    /// `f({e})`.
    pub fn singleton_value(&self, item: &Item, cache: &mut KernelCache) -> Result<f64> {
        let mut v = self.spec.lambda_i * item.info;
        if self.has_diversity() {
            let kee = self.similarity(item, item, cache)?;
            v += self.spec.lambda_d * 0.5 * (1.0 + self.spec.alpha * kee).ln();
        }
        if !v.is_finite() {
            return Err(Error::numeric(item.id(), "singleton value is not finite"));
        }
        Ok(v)
    }

    pub fn empty_selection(&self) -> Selection {
        Selection {
            members: Vec::new(),
            diversity: self
                .has_diversity()
                .then(|| DiversityState::new(self.spec.alpha)),
            value: 0.0,
            instance: NEXT_SELECTION_ID.fetch_add(1, Ordering::Relaxed),
        }
    }
}

static NEXT_SELECTION_ID: AtomicU64 = AtomicU64::new(1);

/// Marginal gain of one candidate against a [`Selection`].
#[derive(Debug, Clone)]
pub struct Gain {
    /// `lambda_i * g(e) + lambda_d * diversity gain`.
    pub total: f64,
    pub diversity: Option<DiversityProbe>,
    instance: u64,
    len: usize,
}

impl Gain {
    /// The diversity term was clamped; committing is refused.
    pub fn degenerate(&self) -> bool {
        self.diversity.as_ref().is_some_and(|p| p.degenerate)
    }
}

/// A growing solution set with its incrementally maintained value.
#[derive(Debug, Clone)]
pub struct Selection {
    members: Vec<Item>,
    diversity: Option<DiversityState>,
    value: f64,
    instance: u64,
}

impl Selection {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Item] {
        &self.members
    }

    /// Sum of committed gains.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn diversity(&self) -> Option<&DiversityState> {
        self.diversity.as_ref()
    }

    pub fn samples(&self) -> Vec<Sample> {
        self.members.iter().map(|m| (*m.sample).clone()).collect()
    }

    pub fn commit(&mut self, item: Item, gain: Gain) -> Result<()> {
        if gain.instance != self.instance || gain.len != self.members.len() {
            return Err(Error::StaleProbe);
        }
        match (&mut self.diversity, gain.diversity) {
            (Some(state), Some(probe)) => state.commit(item.key, item.id(), probe)?,
            (None, None) => {}
            _ => return Err(Error::StaleProbe),
        }
        self.value += gain.total;
        self.members.push(item);
        Ok(())
    }

    /// Recomputes the value densely and compares it with the incremental one.
    pub fn audit(&self, spec: &ObjectiveSpec, tol: f64) -> Result<()> {
        let direct = objective_value(&self.samples(), spec)?;
        let err = (direct - self.value).abs() / direct.abs().max(1.0);
        if err > tol {
            return Err(Error::numeric(
                self.members.last().map(|m| m.id()).unwrap_or(""),
                format!(
                    "incremental value {} drifted from direct value {direct}",
                    self.value
                ),
            ));
        }
        Ok(())
    }
}

/// Diversity part of the marginal gain of `candidate` against `selection`.
pub fn diversity_gain(
    selection: &Selection,
    candidate: &Item,
    objective: &Objective,
    cache: &mut KernelCache,
) -> Result<DiversityProbe> {
    let state = selection
        .diversity
        .as_ref()
        .ok_or_else(|| Error::Config("objective has no diversity term".into()))?;
    let kee = objective.similarity(candidate, candidate, cache)?;
    let mut sims = Vec::with_capacity(selection.members.len());
    for m in &selection.members {
        sims.push(objective.similarity(candidate, m, cache)?);
    }
    state.probe(candidate.id(), &sims, kee)
}

/// Full marginal gain `f(S + e) - f(S)` of a candidate not yet in the selection.
pub fn objective_gain(
    selection: &Selection,
    candidate: &Item,
    objective: &Objective,
    cache: &mut KernelCache,
) -> Result<Gain> {
    let spec = objective.spec();
    let mut total = spec.lambda_i * candidate.info;
    let diversity = if objective.has_diversity() {
        let probe = diversity_gain(selection, candidate, objective, cache)?;
        total += spec.lambda_d * probe.gain;
        Some(probe)
    } else {
        None
    };
    if !total.is_finite() {
        return Err(Error::numeric(candidate.id(), "marginal gain is not finite"));
    }
    Ok(Gain {
        total,
        diversity,
        instance: selection.instance,
        len: selection.members.len(),
    })
}
