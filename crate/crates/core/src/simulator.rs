//! Synthetic streams with the data peculiarities of on-device capture.
//!
//! The world is a set of class centroids in feature space. Each round draws
//! fresh base points with imbalanced class frequencies, emits every base point
//! as `r + 1` consecutive noisy replicas sharing a group id, and interleaves
//! non-object filler at random positions. Softmax vectors come from a
//! sharpness-scaled softmax over negative squared centroid distances, with one
//! extra class for non-objects whose centroid is the origin.
//!
//! Base points are pulled part of the way toward a second class centroid, so
//! points near class boundaries get high-entropy softmax outputs. Non-object
//! features are constant vectors holding the mean feature of the next real
//! item, the feature-space analogue of a flat mean-colour frame.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::algorithms::SelectorConfig;
use crate::error::{Error, Result};
use crate::sample::{Record, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub classes: usize,
    pub feature_dim: usize,
    pub centroid_spread: f64,
    pub cluster_sigma: f64,
    pub softmax_sharpness: f64,
    pub seed: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            classes: 10,
            feature_dim: 64,
            centroid_spread: 1.0,
            cluster_sigma: 0.5,
            softmax_sharpness: 4.0,
            seed: 0,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if self.classes == 0 || self.feature_dim == 0 {
            return Err(Error::Config("classes and feature_dim must be positive".into()));
        }
        if !pos(self.centroid_spread) || !pos(self.cluster_sigma) || !pos(self.softmax_sharpness) {
            return Err(Error::Config(
                "centroid_spread, cluster_sigma and softmax_sharpness must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Label carried by non-object items.
    pub fn nonobject_label(&self) -> String {
        self.classes.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeculiaritySpec {
    pub imbalance_factor: u32,
    pub imbalanced_fraction: f64,
    pub replication: usize,
    pub noise_sigma: f64,
    pub nonobject_count: usize,
    pub round_size: usize,
    pub rounds: usize,
}

impl Default for PeculiaritySpec {
    fn default() -> Self {
        PeculiaritySpec {
            imbalance_factor: 10,
            imbalanced_fraction: 0.5,
            replication: 4,
            noise_sigma: 0.01,
            nonobject_count: 0,
            round_size: 100,
            rounds: 1,
        }
    }
}

impl PeculiaritySpec {
    pub fn validate(&self) -> Result<()> {
        if self.imbalance_factor == 0 {
            return Err(Error::Config("imbalance_factor must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.imbalanced_fraction) {
            return Err(Error::Config("imbalanced_fraction must lie in [0, 1]".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        if self.round_size == 0 || self.rounds == 0 {
            return Err(Error::Config("round_size and rounds must be positive".into()));
        }
        if self.nonobject_count > self.round_size {
            return Err(Error::Config("nonobject_count exceeds round_size".into()));
        }
        let slots = self.round_size - self.nonobject_count;
        if slots % (self.replication + 1) != 0 {
            return Err(Error::Config(format!(
                "{slots} object slots cannot hold groups of {} replicas",
                self.replication + 1
            )));
        }
        Ok(())
    }

    /// Distinct base points per round.
    pub fn base_points(&self) -> usize {
        (self.round_size - self.nonobject_count) / (self.replication + 1)
    }
}

/// Stream and budget parameters of the large classification setting:
/// 2048 items per round of which 1408 are non-objects, 30 rounds, five noisy
/// copies of each base point, a tenfold imbalance on half of ten classes, and
/// Sieve-Streaming++ with `K = 128`, `eps = 0.1`.
pub fn paper_scale_preset() -> (WorldSpec, PeculiaritySpec, SelectorConfig) {
    let world = WorldSpec::default();
    let pec = PeculiaritySpec {
        imbalance_factor: 10,
        imbalanced_fraction: 0.5,
        replication: 4,
        noise_sigma: 0.01,
        nonobject_count: 1408,
        round_size: 2048,
        rounds: 30,
    };
    (world, pec, SelectorConfig::sieve_streaming_pp(128, 0.1))
}

fn centroids(world: &WorldSpec) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(world.seed);
    let normal = Normal::new(0.0, world.centroid_spread).expect("positive spread");
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(world.classes);
    while out.len() < world.classes {
        let c: Vec<f64> = (0..world.feature_dim).map(|_| normal.sample(&mut rng)).collect();
        // Continuous draws collide with probability zero; guard anyway.
        if out.iter().all(|o| o != &c) {
            out.push(c);
        }
    }
    out
}

/// Class centroids of the world, in class order.
pub fn world_centroids(world: &WorldSpec) -> Result<Vec<Vec<f64>>> {
    world.validate()?;
    Ok(centroids(world))
}

fn softmax_for(x: &[f64], centroids: &[Vec<f64>], sharpness: f64) -> Vec<f64> {
    let d = x.len() as f64;
    let sq = |c: Option<&Vec<f64>>| -> f64 {
        match c {
            Some(c) => x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum(),
            None => x.iter().map(|a| a * a).sum(),
        }
    };
    let mut logits: Vec<f64> = centroids
        .iter()
        .map(|c| -sharpness * sq(Some(c)) / d)
        .collect();
    logits.push(-sharpness * sq(None) / d);
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    p
}

enum Slot {
    Group(usize),
    NonObject(usize),
}

/// Generates the labelled stream of one round.
pub fn generate_round(world: &WorldSpec, pec: &PeculiaritySpec, round: usize) -> Result<Vec<Record>> {
    world.validate()?;
    pec.validate()?;
    if round >= pec.rounds {
        return Err(Error::Config(format!(
            "round {round} out of range for {} rounds",
            pec.rounds
        )));
    }
    let cents = centroids(world);
    let mut rng = ChaCha8Rng::seed_from_u64(world.seed);
    rng.set_stream(round as u64 + 1);

    let c = world.classes;
    let rare = ((c as f64) * pec.imbalanced_fraction).round() as usize;
    let weights: Vec<f64> = (0..c)
        .map(|j| if j < rare { 1.0 / pec.imbalance_factor as f64 } else { 1.0 })
        .collect();
    let total_w: f64 = weights.iter().sum();
    let spread = Normal::new(0.0, world.cluster_sigma).expect("positive sigma");
    let pull = Uniform::new(0.0, 0.5).expect("valid range");

    let n_base = pec.base_points();
    let mut bases = Vec::with_capacity(n_base);
    for _ in 0..n_base {
        let mut u = rng.random::<f64>() * total_w;
        let mut class = c - 1;
        for (j, w) in weights.iter().enumerate() {
            if u < *w {
                class = j;
                break;
            }
            u -= w;
        }
        let other = if c > 1 {
            (class + 1 + rng.random_range(0..c - 1)) % c
        } else {
            class
        };
        let t = pull.sample(&mut rng);
        let f: Vec<f64> = (0..world.feature_dim)
            .map(|i| (1.0 - t) * cents[class][i] + t * cents[other][i] + spread.sample(&mut rng))
            .collect();
        bases.push((class, f));
    }

    let mut slots: Vec<Slot> = (0..n_base)
        .map(Slot::Group)
        .chain((0..pec.nonobject_count).map(Slot::NonObject))
        .collect();
    slots.shuffle(&mut rng);

    // Mean feature of the next real base point, or the last one at the tail.
    let mut next_mean = vec![0.0; slots.len()];
    let mut carry = bases.last().map(|(_, f)| mean(f)).unwrap_or(0.0);
    for (i, slot) in slots.iter().enumerate().rev() {
        if let Slot::Group(b) = slot {
            carry = mean(&bases[*b].1);
        }
        next_mean[i] = carry;
    }

    let noise = (pec.noise_sigma > 0.0).then(|| Normal::new(0.0, pec.noise_sigma).expect("sigma"));
    let mut out = Vec::with_capacity(pec.round_size);
    let seq0 = (round * pec.round_size) as u64;
    for (i, slot) in slots.iter().enumerate() {
        match *slot {
            Slot::Group(b) => {
                let group = format!("r{round:03}-b{b:05}");
                let (class, base) = &bases[b];
                for rep in 0..=pec.replication {
                    let f: Vec<f64> = match &noise {
                        Some(n) => base.iter().map(|v| v + n.sample(&mut rng)).collect(),
                        None => base.clone(),
                    };
                    let seq = seq0 + out.len() as u64;
                    let sample = Sample::new(format!("{group}-{rep}"), seq)
                        .with_group(group.clone())
                        .with_softmax(softmax_for(&f, &cents, world.softmax_sharpness))
                        .with_features(f);
                    out.push(Record::new(sample, Some(class.to_string())));
                }
            }
            Slot::NonObject(k) => {
                let f = vec![next_mean[i]; world.feature_dim];
                let seq = seq0 + out.len() as u64;
                let sample = Sample::new(format!("r{round:03}-n{k:05}"), seq)
                    .with_softmax(softmax_for(&f, &cents, world.softmax_sharpness))
                    .with_features(f);
                out.push(Record::new(sample, Some(world.nonobject_label())));
            }
        }
    }
    Ok(out)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub selected: usize,
    /// Distinct duplication groups among chosen object items.
    pub unique_groups: usize,
    pub nonobject: usize,
    /// Chosen items per label, non-object label included.
    pub per_class: BTreeMap<String, usize>,
}

/// Summarises a selection using the ground-truth labels carried by records.
pub fn evaluate_selection(chosen: &[Record], world: &WorldSpec) -> EvaluationReport {
    let nonobject = world.nonobject_label();
    let mut report = EvaluationReport {
        selected: chosen.len(),
        ..Default::default()
    };
    let mut groups = HashSet::new();
    for r in chosen {
        let is_nonobject = r.label.as_deref() == Some(nonobject.as_str());
        if let Some(l) = &r.label {
            *report.per_class.entry(l.clone()).or_default() += 1;
        }
        if is_nonobject {
            report.nonobject += 1;
        } else {
            groups.insert(r.sample.group.as_str());
        }
    }
    report.unique_groups = groups.len();
    report
}
