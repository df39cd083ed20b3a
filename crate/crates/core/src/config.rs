//! Flat key-value configuration.
//!
//! One `key = value` pair per line, keys grouped by dotted section prefixes
//! (`objective.*`, `selector.*`, `simulator.*`, `harness.*`). `#` starts a
//! comment; blank lines are ignored; lists are comma separated. The canonical
//! form lists every key in sorted order, so a parsed canonical file
//! re-serialises to the same bytes.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use crate::algorithms::{Algorithm, SelectorConfig, DEFAULT_REJECTION_BUDGET};
use crate::error::{Error, Result};
use crate::objective::{Informativeness, KernelKind, KernelSpec, ObjectiveSpec};
use crate::simulator::{paper_scale_preset, PeculiaritySpec, WorldSpec};

/// Raw ordered key-value pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || !k.contains('.') {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("key `{k}` lacks a section prefix"),
                });
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("duplicate key `{k}`"),
                });
            }
        }
        Ok(KeyValues(map))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Display) {
        self.0.insert(key.into(), value.to_string());
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(Error::Config(format!("`{key}` must be on or off, got `{value}`"))),
    }
}

fn switch(v: bool) -> &'static str {
    if v {
        "on"
    } else {
        "off"
    }
}

/// Where round streams come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Simulator,
    /// One record file per round.
    Records(Vec<PathBuf>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessSection {
    pub algorithms: Vec<Algorithm>,
    /// Sweep for the sieve algorithms; each value yields one selector.
    pub epsilons: Vec<f64>,
    /// Budgets swept by the speed measurement.
    pub ks: Vec<usize>,
    pub divide_k: usize,
    pub seeds: Vec<u64>,
    pub cache: bool,
    pub iterations: usize,
    /// Write measured latencies into the per-round CSV. Off gives
    /// byte-reproducible output.
    pub record_latency: bool,
    pub source: Source,
}

impl Default for HarnessSection {
    fn default() -> Self {
        HarnessSection {
            algorithms: vec![Algorithm::Random, Algorithm::EntropyTopk, Algorithm::SieveStreamingPp],
            epsilons: vec![0.1],
            ks: vec![16, 32],
            divide_k: 1,
            seeds: vec![0],
            cache: true,
            iterations: 1000,
            record_latency: false,
            source: Source::Simulator,
        }
    }
}

/// Typed view of a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub objective: ObjectiveSpec,
    pub selector: SelectorConfig,
    pub world: WorldSpec,
    pub peculiarity: PeculiaritySpec,
    pub harness: HarnessSection,
}

impl Default for Config {
    fn default() -> Self {
        let (world, peculiarity, selector) = paper_scale_preset();
        Config {
            objective: ObjectiveSpec::default(),
            selector,
            world,
            peculiarity,
            harness: HarnessSection::default(),
        }
    }
}

const KEYS: &[&str] = &[
    "objective.lambda_i",
    "objective.lambda_d",
    "objective.alpha",
    "objective.informativeness",
    "objective.detection_lambda",
    "objective.kernel",
    "objective.beta",
    "selector.algorithm",
    "selector.k",
    "selector.epsilon",
    "selector.t",
    "selector.seed",
    "simulator.classes",
    "simulator.feature_dim",
    "simulator.centroid_spread",
    "simulator.cluster_sigma",
    "simulator.softmax_sharpness",
    "simulator.seed",
    "simulator.imbalance_factor",
    "simulator.imbalanced_fraction",
    "simulator.replication",
    "simulator.noise_sigma",
    "simulator.nonobject_count",
    "simulator.round_size",
    "simulator.rounds",
    "harness.algorithms",
    "harness.epsilons",
    "harness.ks",
    "harness.divide_k",
    "harness.seeds",
    "harness.cache",
    "harness.iterations",
    "harness.record_latency",
    "harness.source",
];

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Builds a config from defaults overridden by `kv`. Unknown keys are
    /// rejected.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        if let Some(k) = kv.keys().find(|k| !KEYS.contains(k)) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        let mut c = Config::default();
        let get = |key: &str| kv.get(key);

        let o = &mut c.objective;
        if let Some(v) = get("objective.lambda_i") {
            o.lambda_i = parse_value("objective.lambda_i", v)?;
        }
        if let Some(v) = get("objective.lambda_d") {
            o.lambda_d = parse_value("objective.lambda_d", v)?;
        }
        if let Some(v) = get("objective.alpha") {
            o.alpha = parse_value("objective.alpha", v)?;
        }
        if let Some(v) = get("objective.informativeness") {
            o.informativeness = v.parse::<Informativeness>()?;
        }
        if let Some(v) = get("objective.detection_lambda") {
            let lambda = parse_value("objective.detection_lambda", v)?;
            match &mut o.informativeness {
                Informativeness::DetectionCombo { lambda: l } => *l = lambda,
                _ => {
                    return Err(Error::Config(
                        "objective.detection_lambda requires detection-combo".into(),
                    ))
                }
            }
        }
        let kind = match get("objective.kernel") {
            Some(v) => v.parse::<KernelKind>()?,
            None => o.kernel.kind,
        };
        let beta = match get("objective.beta") {
            Some(v) => parse_value("objective.beta", v)?,
            None => o.kernel.beta,
        };
        o.kernel = KernelSpec::new(kind, beta);

        if let Some(v) = get("selector.algorithm") {
            let algorithm: Algorithm = v.parse()?;
            if algorithm != c.selector.algorithm {
                c.selector = SelectorConfig {
                    algorithm,
                    k: c.selector.k,
                    epsilon: algorithm.is_sieve().then_some(0.1),
                    t: (algorithm == Algorithm::ThreeSieves).then_some(DEFAULT_REJECTION_BUDGET),
                    seed: (algorithm == Algorithm::Random).then_some(0),
                };
            }
        }
        let s = &mut c.selector;
        if let Some(v) = get("selector.k") {
            s.k = parse_value("selector.k", v)?;
        }
        if let Some(v) = get("selector.epsilon") {
            s.epsilon = Some(parse_value("selector.epsilon", v)?);
        }
        if let Some(v) = get("selector.t") {
            s.t = Some(parse_value("selector.t", v)?);
        }
        if let Some(v) = get("selector.seed") {
            s.seed = Some(parse_value("selector.seed", v)?);
        }

        let w = &mut c.world;
        macro_rules! field {
            ($target:expr, $key:literal) => {
                if let Some(v) = get($key) {
                    $target = parse_value($key, v)?;
                }
            };
        }
        field!(w.classes, "simulator.classes");
        field!(w.feature_dim, "simulator.feature_dim");
        field!(w.centroid_spread, "simulator.centroid_spread");
        field!(w.cluster_sigma, "simulator.cluster_sigma");
        field!(w.softmax_sharpness, "simulator.softmax_sharpness");
        field!(w.seed, "simulator.seed");
        let p = &mut c.peculiarity;
        field!(p.imbalance_factor, "simulator.imbalance_factor");
        field!(p.imbalanced_fraction, "simulator.imbalanced_fraction");
        field!(p.replication, "simulator.replication");
        field!(p.noise_sigma, "simulator.noise_sigma");
        field!(p.nonobject_count, "simulator.nonobject_count");
        field!(p.round_size, "simulator.round_size");
        field!(p.rounds, "simulator.rounds");

        let h = &mut c.harness;
        if let Some(v) = get("harness.algorithms") {
            h.algorithms = parse_list("harness.algorithms", v)?;
        }
        if let Some(v) = get("harness.epsilons") {
            h.epsilons = parse_list("harness.epsilons", v)?;
        }
        if let Some(v) = get("harness.ks") {
            h.ks = parse_list("harness.ks", v)?;
        }
        field!(h.divide_k, "harness.divide_k");
        if let Some(v) = get("harness.seeds") {
            h.seeds = parse_list("harness.seeds", v)?;
        }
        if let Some(v) = get("harness.cache") {
            h.cache = parse_switch("harness.cache", v)?;
        }
        field!(h.iterations, "harness.iterations");
        if let Some(v) = get("harness.record_latency") {
            h.record_latency = parse_switch("harness.record_latency", v)?;
        }
        if let Some(v) = get("harness.source") {
            h.source = if v == "simulator" {
                Source::Simulator
            } else {
                Source::Records(v.split(',').map(|p| PathBuf::from(p.trim())).collect())
            };
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        self.selector.validate()?;
        self.world.validate()?;
        self.peculiarity.validate()?;
        let h = &self.harness;
        if h.algorithms.is_empty() {
            return Err(Error::Config("harness.algorithms is empty".into()));
        }
        if h.epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(Error::Config("harness.epsilons must lie in (0, 1)".into()));
        }
        if h.seeds.is_empty() {
            return Err(Error::Config("harness.seeds needs at least one seed".into()));
        }
        if h.divide_k == 0 || self.selector.k % h.divide_k != 0 {
            return Err(Error::Config(format!(
                "harness.divide_k = {} must divide selector.k = {}",
                h.divide_k, self.selector.k
            )));
        }
        if h.ks.contains(&0) {
            return Err(Error::Config("harness.ks must be positive".into()));
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        let o = &self.objective;
        kv.set("objective.lambda_i", o.lambda_i);
        kv.set("objective.lambda_d", o.lambda_d);
        kv.set("objective.alpha", o.alpha);
        kv.set("objective.informativeness", o.informativeness.name());
        if let Informativeness::DetectionCombo { lambda } = o.informativeness {
            kv.set("objective.detection_lambda", lambda);
        }
        kv.set("objective.kernel", o.kernel.kind);
        kv.set("objective.beta", o.kernel.beta);
        let s = &self.selector;
        kv.set("selector.algorithm", s.algorithm);
        kv.set("selector.k", s.k);
        if let Some(e) = s.epsilon {
            kv.set("selector.epsilon", e);
        }
        if let Some(t) = s.t {
            kv.set("selector.t", t);
        }
        if let Some(seed) = s.seed {
            kv.set("selector.seed", seed);
        }
        let w = &self.world;
        kv.set("simulator.classes", w.classes);
        kv.set("simulator.feature_dim", w.feature_dim);
        kv.set("simulator.centroid_spread", w.centroid_spread);
        kv.set("simulator.cluster_sigma", w.cluster_sigma);
        kv.set("simulator.softmax_sharpness", w.softmax_sharpness);
        kv.set("simulator.seed", w.seed);
        let p = &self.peculiarity;
        kv.set("simulator.imbalance_factor", p.imbalance_factor);
        kv.set("simulator.imbalanced_fraction", p.imbalanced_fraction);
        kv.set("simulator.replication", p.replication);
        kv.set("simulator.noise_sigma", p.noise_sigma);
        kv.set("simulator.nonobject_count", p.nonobject_count);
        kv.set("simulator.round_size", p.round_size);
        kv.set("simulator.rounds", p.rounds);
        let h = &self.harness;
        kv.set("harness.algorithms", join(&h.algorithms));
        kv.set("harness.epsilons", join(&h.epsilons));
        kv.set("harness.ks", join(&h.ks));
        kv.set("harness.divide_k", h.divide_k);
        kv.set("harness.seeds", join(&h.seeds));
        kv.set("harness.cache", switch(h.cache));
        kv.set("harness.iterations", h.iterations);
        kv.set("harness.record_latency", switch(h.record_latency));
        kv.set(
            "harness.source",
            match &h.source {
                Source::Simulator => "simulator".to_string(),
                Source::Records(paths) => paths
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
            },
        );
        kv
    }

    /// Canonical text form.
    pub fn to_text(&self) -> String {
        self.to_key_values().to_text()
    }
}
