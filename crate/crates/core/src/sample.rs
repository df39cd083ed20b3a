//! Stream items.
//!
//! [`Sample`] is the selector-facing view of a stream item and has no label
//! field, so no selection code path can observe ground truth. Labels travel
//! alongside in [`Record`] and are split off before items reach a selector.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SOFTMAX_SUM_TOL: f64 = 1e-6;

/// A stream item as selectors see it.
///
/// There is no label to read:
///
/// ```compile_fail
/// let s = sievestream::Sample::new("a", 0);
/// let _ = s.label;
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub seq: u64,
    /// Duplication group; items generated as replicas of one base point share it.
    pub group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub softmax: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
    /// Precomputed non-negative informativeness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl Sample {
    /// A bare sample whose group defaults to its id.
    pub fn new(id: impl Into<String>, seq: u64) -> Self {
        let id = id.into();
        Sample {
            group: id.clone(),
            id,
            seq,
            softmax: None,
            features: None,
            score: None,
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = group.into();
        self
    }

    pub fn with_softmax(mut self, softmax: Vec<f64>) -> Self {
        self.softmax = Some(softmax);
        self
    }

    pub fn with_features(mut self, features: Vec<f64>) -> Self {
        self.features = Some(features);
        self
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    /// Checks the field-level invariants of a stream item.
    pub fn validate(&self) -> Result<()> {
        if self.softmax.is_none() && self.features.is_none() && self.score.is_none() {
            return Err(Error::validation(
                &self.id,
                "none of softmax, features, score is present",
            ));
        }
        if let Some(p) = &self.softmax {
            if p.is_empty() {
                return Err(Error::validation(&self.id, "softmax is empty"));
            }
            if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::validation(
                    &self.id,
                    "softmax entries must be finite and non-negative",
                ));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > SOFTMAX_SUM_TOL {
                return Err(Error::validation(
                    &self.id,
                    format!("softmax sums to {sum}, expected 1"),
                ));
            }
        }
        if let Some(f) = &self.features {
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(&self.id, "features must be finite"));
            }
        }
        if let Some(s) = self.score {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::validation(
                    &self.id,
                    format!("score must be finite and non-negative, got {s}"),
                ));
            }
        }
        Ok(())
    }
}

/// One line of a record file: a sample plus evaluation-only label and any
/// unrecognised keys, which are carried through untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub sample: Sample,
    pub label: Option<String>,
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Record {
    pub fn new(sample: Sample, label: Option<String>) -> Self {
        Record {
            sample,
            label,
            extra: BTreeMap::new(),
        }
    }

    /// Separates the selector-facing sample from the label.
    pub fn split(self) -> (Sample, Option<String>) {
        (self.sample, self.label)
    }
}

#[derive(Serialize, Deserialize)]
struct RecordWire {
    id: String,
    seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    softmax: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(flatten)]
    extra: BTreeMap<String, serde_json::Value>,
}

impl Serialize for Record {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let s = &self.sample;
        RecordWire {
            id: s.id.clone(),
            seq: s.seq,
            group: Some(s.group.clone()),
            softmax: s.softmax.clone(),
            features: s.features.clone(),
            score: s.score,
            label: self.label.clone(),
            extra: self.extra.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Record {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let w = RecordWire::deserialize(deserializer)?;
        Ok(Record {
            sample: Sample {
                group: w.group.unwrap_or_else(|| w.id.clone()),
                id: w.id,
                seq: w.seq,
                softmax: w.softmax,
                features: w.features,
                score: w.score,
            },
            label: w.label,
            extra: w.extra,
        })
    }
}
