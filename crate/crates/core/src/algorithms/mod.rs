//! Batch selectors.
//!
//! The streaming selectors consume a stream one [`Sample`] at a time through
//! [`Selector::push`] and never revisit an item. The offline oracles,
//! [`offline_greedy`] and [`brute_force`], hold the whole pool and exist for
//! verification.

mod baselines;
mod engine;
mod grid;
mod offline;
mod sieve_streaming;
mod sieve_streaming_pp;
mod three_sieves;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::ObjectiveSpec;
use crate::sample::Sample;

pub use baselines::{EntropyTopK, RandomReservoir};
pub use engine::SelectorOptions;
pub use grid::threshold_grid;
pub use offline::{brute_force, offline_greedy, BRUTE_FORCE_LIMIT};
pub use sieve_streaming::SieveStreaming;
pub use sieve_streaming_pp::SieveStreamingPp;
pub use three_sieves::ThreeSieves;

/// Default ThreeSieves rejection budget.
pub const DEFAULT_REJECTION_BUDGET: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    SieveStreaming,
    SieveStreamingPp,
    ThreeSieves,
    Random,
    EntropyTopk,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::SieveStreaming,
        Algorithm::SieveStreamingPp,
        Algorithm::ThreeSieves,
        Algorithm::Random,
        Algorithm::EntropyTopk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::SieveStreaming => "sieve-streaming",
            Algorithm::SieveStreamingPp => "sieve-streaming-pp",
            Algorithm::ThreeSieves => "three-sieves",
            Algorithm::Random => "random",
            Algorithm::EntropyTopk => "entropy-topk",
        }
    }

    pub fn is_sieve(self) -> bool {
        matches!(
            self,
            Algorithm::SieveStreaming | Algorithm::SieveStreamingPp | Algorithm::ThreeSieves
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    /// Grid resolution; sieve variants only.
    pub epsilon: Option<f64>,
    /// Consecutive-rejection budget; ThreeSieves only.
    pub t: Option<usize>,
    /// Random baseline only.
    pub seed: Option<u64>,
}

impl SelectorConfig {
    pub fn sieve_streaming(k: usize, epsilon: f64) -> Self {
        Self::bare(Algorithm::SieveStreaming, k).with_epsilon(epsilon)
    }

    pub fn sieve_streaming_pp(k: usize, epsilon: f64) -> Self {
        Self::bare(Algorithm::SieveStreamingPp, k).with_epsilon(epsilon)
    }

    pub fn three_sieves(k: usize, epsilon: f64, t: usize) -> Self {
        SelectorConfig {
            t: Some(t),
            ..Self::bare(Algorithm::ThreeSieves, k).with_epsilon(epsilon)
        }
    }

    pub fn random(k: usize, seed: u64) -> Self {
        SelectorConfig {
            seed: Some(seed),
            ..Self::bare(Algorithm::Random, k)
        }
    }

    pub fn entropy_topk(k: usize) -> Self {
        Self::bare(Algorithm::EntropyTopk, k)
    }

    fn bare(algorithm: Algorithm, k: usize) -> Self {
        SelectorConfig {
            algorithm,
            k,
            epsilon: None,
            t: None,
            seed: None,
        }
    }

    fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        match (self.algorithm.is_sieve(), self.epsilon) {
            (true, Some(e)) if e > 0.0 && e < 1.0 => {}
            (true, Some(e)) => {
                return Err(Error::Config(format!("epsilon must lie in (0, 1), got {e}")))
            }
            (true, None) => {
                return Err(Error::Config(format!("{} requires epsilon", self.algorithm)))
            }
            (false, Some(_)) => {
                return Err(Error::Config(format!("{} takes no epsilon", self.algorithm)))
            }
            (false, None) => {}
        }
        match (self.algorithm == Algorithm::ThreeSieves, self.t) {
            (true, Some(0)) => return Err(Error::Config("t must be positive".into())),
            (true, None) => return Err(Error::Config("three-sieves requires t".into())),
            (false, Some(_)) => {
                return Err(Error::Config(format!("{} takes no t", self.algorithm)))
            }
            _ => {}
        }
        if self.algorithm == Algorithm::Random && self.seed.is_none() {
            return Err(Error::Config("random requires a seed".into()));
        }
        Ok(())
    }

    /// Short label used in reports, e.g. `sieve-streaming-pp:k=16:eps=0.1`.
    pub fn label(&self) -> String {
        let mut s = format!("{}:k={}", self.algorithm, self.k);
        if let Some(e) = self.epsilon {
            s.push_str(&format!(":eps={e}"));
        }
        if let Some(t) = self.t {
            s.push_str(&format!(":t={t}"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Chosen samples in stream order.
    pub chosen: Vec<Sample>,
    pub value: f64,
    pub samples_seen: u64,
    /// Largest number of samples held at once, summed over all sieves.
    pub stored_peak: usize,
    pub gain_evaluations: u64,
    pub kernel_evaluations: u64,
    pub cache_hits: u64,
}

impl SelectionResult {
    pub fn chosen_ids(&self) -> Vec<&str> {
        self.chosen.iter().map(|s| s.id.as_str()).collect()
    }
}

/// A streaming selector of any supported kind.
#[derive(Debug)]
pub enum Selector {
    SieveStreaming(SieveStreaming),
    SieveStreamingPp(SieveStreamingPp),
    ThreeSieves(ThreeSieves),
    Random(RandomReservoir),
    EntropyTopk(EntropyTopK),
}

impl Selector {
    pub fn new(spec: &ObjectiveSpec, cfg: &SelectorConfig) -> Result<Self> {
        Self::with_options(spec, cfg, SelectorOptions::default())
    }

    pub fn with_options(
        spec: &ObjectiveSpec,
        cfg: &SelectorConfig,
        options: SelectorOptions,
    ) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.k;
        Ok(match cfg.algorithm {
            Algorithm::SieveStreaming => Selector::SieveStreaming(SieveStreaming::new(
                spec,
                k,
                cfg.epsilon.unwrap_or_default(),
                options,
            )?),
            Algorithm::SieveStreamingPp => Selector::SieveStreamingPp(SieveStreamingPp::new(
                spec,
                k,
                cfg.epsilon.unwrap_or_default(),
                options,
            )?),
            Algorithm::ThreeSieves => Selector::ThreeSieves(ThreeSieves::new(
                spec,
                k,
                cfg.epsilon.unwrap_or_default(),
                cfg.t.unwrap_or(DEFAULT_REJECTION_BUDGET),
                options,
            )?),
            Algorithm::Random => Selector::Random(RandomReservoir::new(
                spec,
                k,
                cfg.seed.unwrap_or_default(),
                options,
            )?),
            Algorithm::EntropyTopk => Selector::EntropyTopk(EntropyTopK::new(spec, k, options)?),
        })
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        match self {
            Selector::SieveStreaming(s) => s.push(sample),
            Selector::SieveStreamingPp(s) => s.push(sample),
            Selector::ThreeSieves(s) => s.push(sample),
            Selector::Random(s) => s.push(sample),
            Selector::EntropyTopk(s) => s.push(sample),
        }
    }

    /// Samples currently held, summed over sieves.
    pub fn stored(&self) -> usize {
        match self {
            Selector::SieveStreaming(s) => s.stored(),
            Selector::SieveStreamingPp(s) => s.stored(),
            Selector::ThreeSieves(s) => s.stored(),
            Selector::Random(s) => s.stored(),
            Selector::EntropyTopk(s) => s.stored(),
        }
    }

    pub fn finish(self) -> Result<SelectionResult> {
        match self {
            Selector::SieveStreaming(s) => s.finish(),
            Selector::SieveStreamingPp(s) => s.finish(),
            Selector::ThreeSieves(s) => s.finish(),
            Selector::Random(s) => s.finish(),
            Selector::EntropyTopk(s) => s.finish(),
        }
    }
}

/// Runs a fresh selector over a whole stream.
pub fn select<I>(stream: I, spec: &ObjectiveSpec, cfg: &SelectorConfig) -> Result<SelectionResult>
where
    I: IntoIterator<Item = Sample>,
{
    select_with(stream, spec, cfg, SelectorOptions::default())
}

pub fn select_with<I>(
    stream: I,
    spec: &ObjectiveSpec,
    cfg: &SelectorConfig,
    options: SelectorOptions,
) -> Result<SelectionResult>
where
    I: IntoIterator<Item = Sample>,
{
    let mut sel = Selector::with_options(spec, cfg, options)?;
    for s in stream {
        sel.push(s)?;
    }
    sel.finish()
}

fn expect(cfg: &SelectorConfig, algorithm: Algorithm) -> Result<()> {
    if cfg.algorithm != algorithm {
        return Err(Error::Config(format!(
            "expected algorithm {algorithm}, got {}",
            cfg.algorithm
        )));
    }
    Ok(())
}

pub fn sieve_streaming<I: IntoIterator<Item = Sample>>(
    stream: I,
    spec: &ObjectiveSpec,
    cfg: &SelectorConfig,
) -> Result<SelectionResult> {
    expect(cfg, Algorithm::SieveStreaming)?;
    select(stream, spec, cfg)
}

pub fn sieve_streaming_pp<I: IntoIterator<Item = Sample>>(
    stream: I,
    spec: &ObjectiveSpec,
    cfg: &SelectorConfig,
) -> Result<SelectionResult> {
    expect(cfg, Algorithm::SieveStreamingPp)?;
    select(stream, spec, cfg)
}

pub fn three_sieves<I: IntoIterator<Item = Sample>>(
    stream: I,
    spec: &ObjectiveSpec,
    cfg: &SelectorConfig,
) -> Result<SelectionResult> {
    expect(cfg, Algorithm::ThreeSieves)?;
    select(stream, spec, cfg)
}

pub fn random_baseline<I: IntoIterator<Item = Sample>>(
    stream: I,
    spec: &ObjectiveSpec,
    cfg: &SelectorConfig,
) -> Result<SelectionResult> {
    expect(cfg, Algorithm::Random)?;
    select(stream, spec, cfg)
}

pub fn entropy_topk<I: IntoIterator<Item = Sample>>(
    stream: I,
    spec: &ObjectiveSpec,
    cfg: &SelectorConfig,
) -> Result<SelectionResult> {
    expect(cfg, Algorithm::EntropyTopk)?;
    select(stream, spec, cfg)
}
