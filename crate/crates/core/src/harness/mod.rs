//! Multi-round experiments.
//!
//! Every round's stream is generated once and fed, in identical order, to a
//! fresh selector of each configured algorithm. Labels are split off before
//! samples reach a selector and are only used afterwards to count unique
//! groups. Each algorithm accumulates the ids it has chosen so far as its
//! growing labelled pool.

mod report;
mod speed;
mod verify;

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algorithms::{select_with, Algorithm, SelectionResult, SelectorConfig, SelectorOptions, DEFAULT_REJECTION_BUDGET};
use crate::config::{Config, Source};
use crate::error::{Error, Result};
use crate::objective::{objective_value, ObjectiveSpec};
use crate::record::read_records;
use crate::sample::{Record, Sample};
use crate::simulator::{evaluate_selection, generate_round, PeculiaritySpec, WorldSpec};

pub use report::{summarize, write_csv, AlgorithmSummary, CsvRow, ExperimentSummary, FORMAT_VERSION};
pub use speed::{measure_speed, SpeedCell, SpeedTable};
pub use verify::{verify_guarantees, verify_guarantees_with, InstanceDump, VerificationReport};

/// Where round streams come from.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamSource {
    /// The world seed is replaced by each experiment seed.
    Simulated { world: WorldSpec, peculiarity: PeculiaritySpec },
    /// One record file per round, shared by every seed.
    RecordFiles { paths: Vec<PathBuf>, world: WorldSpec },
}

impl StreamSource {
    pub fn rounds(&self) -> usize {
        match self {
            StreamSource::Simulated { peculiarity, .. } => peculiarity.rounds,
            StreamSource::RecordFiles { paths, .. } => paths.len(),
        }
    }

    /// World used to name the non-object label.
    pub fn world(&self) -> &WorldSpec {
        match self {
            StreamSource::Simulated { world, .. } | StreamSource::RecordFiles { world, .. } => world,
        }
    }

    pub fn round(&self, seed: u64, round: usize) -> Result<Vec<Record>> {
        match self {
            StreamSource::Simulated { world, peculiarity } => {
                let world = WorldSpec { seed, ..*world };
                generate_round(&world, peculiarity, round)
            }
            StreamSource::RecordFiles { paths, .. } => {
                let path = paths.get(round).ok_or_else(|| {
                    Error::Config(format!("round {round} has no record file"))
                })?;
                read_records(path)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithms: Vec<SelectorConfig>,
    pub objective: ObjectiveSpec,
    pub source: StreamSource,
    /// Number of contiguous substreams the budget is divided over.
    pub divide_k: usize,
    /// One repeat per seed. A seed replaces the simulator seed and the
    /// random baseline's seed.
    pub seeds: Vec<u64>,
    pub cache: bool,
    /// Measure per-sample latency. Off keeps every output deterministic.
    pub record_latency: bool,
    /// Worker threads for running algorithms side by side. Ignored while
    /// latency is recorded.
    pub threads: usize,
}

impl ExperimentConfig {
    /// Expands the harness section: every algorithm at `selector.k`, sieve
    /// algorithms once per swept epsilon.
    pub fn from_config(c: &Config) -> Result<Self> {
        c.validate()?;
        let h = &c.harness;
        let k = c.selector.k;
        let t = c.selector.t.unwrap_or(DEFAULT_REJECTION_BUDGET);
        let mut algorithms = Vec::new();
        for &a in &h.algorithms {
            match a {
                Algorithm::SieveStreaming => algorithms
                    .extend(h.epsilons.iter().map(|&e| SelectorConfig::sieve_streaming(k, e))),
                Algorithm::SieveStreamingPp => algorithms
                    .extend(h.epsilons.iter().map(|&e| SelectorConfig::sieve_streaming_pp(k, e))),
                Algorithm::ThreeSieves => algorithms
                    .extend(h.epsilons.iter().map(|&e| SelectorConfig::three_sieves(k, e, t))),
                Algorithm::Random => algorithms.push(SelectorConfig::random(k, 0)),
                Algorithm::EntropyTopk => algorithms.push(SelectorConfig::entropy_topk(k)),
            }
        }
        let source = match &h.source {
            Source::Simulator => StreamSource::Simulated {
                world: c.world,
                peculiarity: c.peculiarity,
            },
            Source::Records(paths) => StreamSource::RecordFiles {
                paths: paths.clone(),
                world: c.world,
            },
        };
        let cfg = ExperimentConfig {
            algorithms,
            objective: c.objective,
            source,
            divide_k: h.divide_k,
            seeds: h.seeds.clone(),
            cache: h.cache,
            record_latency: h.record_latency,
            threads: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms configured".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.divide_k == 0 {
            return Err(Error::Config("divide_k must be positive".into()));
        }
        for a in &self.algorithms {
            a.validate()?;
            if a.k % self.divide_k != 0 {
                return Err(Error::Config(format!(
                    "divide_k = {} does not divide k = {}",
                    self.divide_k, a.k
                )));
            }
        }
        match &self.source {
            StreamSource::Simulated { world, peculiarity } => {
                world.validate()?;
                peculiarity.validate()?;
            }
            StreamSource::RecordFiles { paths, world } => {
                world.validate()?;
                if paths.is_empty() {
                    return Err(Error::Config("record source lists no files".into()));
                }
            }
        }
        Ok(())
    }

    fn options(&self) -> SelectorOptions {
        SelectorOptions {
            cache: self.cache,
            ..SelectorOptions::default()
        }
    }
}

/// Per-sample processing time in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub mean: f64,
    pub stderr: f64,
}

impl Latency {
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        let (mean, stderr) = mean_stderr(xs)?;
        Some(Latency { mean, stderr })
    }
}

pub(crate) fn mean_stderr(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    /// Chosen ids in stream order.
    pub selected_ids: Vec<String>,
    pub selected_count: usize,
    /// Distinct duplication groups among chosen object items.
    pub unique_groups: usize,
    pub nonobject: usize,
    /// Objective of the round's whole batch.
    pub objective: f64,
    /// Sum of the per-substream objectives when the budget is divided.
    pub sub_objective_sum: Option<f64>,
    pub latency: Option<Latency>,
    pub stored_peak: usize,
    pub gain_evaluations: u64,
    pub kernel_evaluations: u64,
    /// Size of the accumulated pool after this round.
    pub cumulative: usize,
}

/// All rounds of one algorithm under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmRun {
    pub algorithm: String,
    pub seed: u64,
    pub rounds: Vec<RoundReport>,
}

impl AlgorithmRun {
    pub fn total_selected(&self) -> usize {
        self.rounds.iter().map(|r| r.selected_count).sum()
    }

    pub fn total_unique(&self) -> usize {
        self.rounds.iter().map(|r| r.unique_groups).sum()
    }

    pub fn total_gain_evaluations(&self) -> u64 {
        self.rounds.iter().map(|r| r.gain_evaluations).sum()
    }
}

/// Outcome of one budget-divided pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DividedSelection {
    /// Union of the sub-batches in stream order.
    pub chosen: Vec<Sample>,
    pub objective: f64,
    pub sub_objectives: Vec<f64>,
    pub stored_peak: usize,
    pub gain_evaluations: u64,
    pub kernel_evaluations: u64,
    /// Per-sample latencies when timing was requested.
    pub latencies: Vec<f64>,
}

/// Splits `stream` into `parts` contiguous substreams and runs a fresh
/// selector with budget `k / parts` on each.
///
/// Substreams are assumed to share no near-duplicates; the union is only as
/// good as that assumption.
pub fn select_divided(
    stream: &[Sample],
    spec: &ObjectiveSpec,
    cfg: &SelectorConfig,
    parts: usize,
    options: SelectorOptions,
    timed: bool,
) -> Result<DividedSelection> {
    cfg.validate()?;
    if parts == 0 || cfg.k % parts != 0 {
        return Err(Error::Config(format!(
            "divide_k = {parts} does not divide k = {}",
            cfg.k
        )));
    }
    let mut out = DividedSelection {
        chosen: Vec::new(),
        objective: 0.0,
        sub_objectives: Vec::with_capacity(parts),
        stored_peak: 0,
        gain_evaluations: 0,
        kernel_evaluations: 0,
        latencies: Vec::new(),
    };
    let n = stream.len();
    for i in 0..parts {
        let part = &stream[i * n / parts..(i + 1) * n / parts];
        let mut sub = SelectorConfig {
            k: cfg.k / parts,
            ..*cfg
        };
        if let Some(seed) = sub.seed.as_mut() {
            *seed = seed.wrapping_add(i as u64);
        }
        let r = if timed {
            timed_select(part, spec, &sub, options, &mut out.latencies)?
        } else {
            select_with(part.iter().cloned(), spec, &sub, options)?
        };
        out.sub_objectives.push(r.value);
        out.stored_peak = out.stored_peak.max(r.stored_peak);
        out.gain_evaluations += r.gain_evaluations;
        out.kernel_evaluations += r.kernel_evaluations;
        out.chosen.extend(r.chosen);
    }
    out.objective = if parts == 1 {
        out.sub_objectives[0]
    } else {
        objective_value(&out.chosen, spec)?
    };
    Ok(out)
}

fn timed_select(
    stream: &[Sample],
    spec: &ObjectiveSpec,
    cfg: &SelectorConfig,
    options: SelectorOptions,
    latencies: &mut Vec<f64>,
) -> Result<SelectionResult> {
    let mut sel = crate::algorithms::Selector::with_options(spec, cfg, options)?;
    for s in stream {
        let s = s.clone();
        let t0 = Instant::now();
        sel.push(s)?;
        latencies.push(t0.elapsed().as_secs_f64());
    }
    sel.finish()
}

struct RoundInput<'a> {
    round: usize,
    records: &'a [Record],
    samples: &'a [Sample],
    index: &'a HashMap<&'a str, usize>,
}

fn run_round(
    cfg: &ExperimentConfig,
    algorithm: &SelectorConfig,
    input: &RoundInput<'_>,
    pool: &mut HashSet<String>,
) -> Result<RoundReport> {
    let d = select_divided(
        input.samples,
        &cfg.objective,
        algorithm,
        cfg.divide_k,
        cfg.options(),
        cfg.record_latency,
    )?;
    let chosen: Vec<Record> = d
        .chosen
        .iter()
        .map(|s| input.records[input.index[s.id.as_str()]].clone())
        .collect();
    let eval = evaluate_selection(&chosen, cfg.source.world());
    pool.extend(d.chosen.iter().map(|s| s.id.clone()));
    Ok(RoundReport {
        round: input.round,
        selected_ids: d.chosen.iter().map(|s| s.id.clone()).collect(),
        selected_count: d.chosen.len(),
        unique_groups: eval.unique_groups,
        nonobject: eval.nonobject,
        objective: d.objective,
        sub_objective_sum: (cfg.divide_k > 1).then(|| d.sub_objectives.iter().sum()),
        latency: Latency::from_samples(&d.latencies),
        stored_peak: d.stored_peak,
        gain_evaluations: d.gain_evaluations,
        kernel_evaluations: d.kernel_evaluations,
        cumulative: pool.len(),
    })
}

/// Runs every configured algorithm over every round for every seed.
///
/// Runs are ordered by seed, then by algorithm in configuration order.
pub fn run_rounds(cfg: &ExperimentConfig) -> Result<Vec<AlgorithmRun>> {
    cfg.validate()?;
    let threads = if cfg.record_latency { 1 } else { cfg.threads.max(1) };
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let algorithms: Vec<SelectorConfig> = cfg
            .algorithms
            .iter()
            .map(|a| SelectorConfig {
                seed: a.seed.map(|_| seed),
                ..*a
            })
            .collect();
        let mut seed_runs: Vec<AlgorithmRun> = algorithms
            .iter()
            .map(|a| AlgorithmRun {
                algorithm: a.label(),
                seed,
                rounds: Vec::new(),
            })
            .collect();
        let mut pools = vec![HashSet::new(); algorithms.len()];
        for round in 0..cfg.source.rounds() {
            let records = cfg.source.round(seed, round)?;
            let samples: Vec<Sample> = records.iter().map(|r| r.sample.clone()).collect();
            let index: HashMap<&str, usize> = records
                .iter()
                .enumerate()
                .map(|(i, r)| (r.sample.id.as_str(), i))
                .collect();
            let input = RoundInput {
                round,
                records: &records,
                samples: &samples,
                index: &index,
            };
            let reports = run_parallel(cfg, &algorithms, &input, &mut pools, threads)?;
            for (run, report) in seed_runs.iter_mut().zip(reports) {
                run.rounds.push(report);
            }
        }
        runs.extend(seed_runs);
    }
    Ok(runs)
}

fn run_parallel(
    cfg: &ExperimentConfig,
    algorithms: &[SelectorConfig],
    input: &RoundInput<'_>,
    pools: &mut [HashSet<String>],
    threads: usize,
) -> Result<Vec<RoundReport>> {
    if threads <= 1 || algorithms.len() <= 1 {
        return algorithms
            .iter()
            .zip(pools.iter_mut())
            .map(|(a, pool)| run_round(cfg, a, input, pool))
            .collect();
    }
    let per = algorithms.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = algorithms
            .chunks(per)
            .zip(pools.chunks_mut(per))
            .map(|(algs, pools)| {
                scope.spawn(move || {
                    algs.iter()
                        .zip(pools.iter_mut())
                        .map(|(a, pool)| run_round(cfg, a, input, pool))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(algorithms.len());
        for h in handles {
            out.extend(h.join().expect("selector thread panicked")?);
        }
        Ok(out)
    })
}

/// [`run_rounds`] with the budget divided; `divide_k` must exceed 1.
pub fn run_divided_k(cfg: &ExperimentConfig) -> Result<Vec<AlgorithmRun>> {
    if cfg.divide_k < 2 {
        return Err(Error::Config(format!(
            "divided run needs divide_k > 1, got {}",
            cfg.divide_k
        )));
    }
    run_rounds(cfg)
}
