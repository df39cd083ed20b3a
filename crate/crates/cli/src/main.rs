//! `sievestream`: select, simulate, bench, and verify from the command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration or usage
//! error, 3 input parse error, 4 numeric error.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sievestream::algorithms::{Selector, SelectorConfig, SelectorOptions};
use sievestream::config::{Config, KeyValues};
use sievestream::harness::{self, ExperimentConfig, FORMAT_VERSION};
use sievestream::objective::objective_value;
use sievestream::record::{write_record_file, RecordReader};
use sievestream::simulator::generate_round;
use sievestream::{Error, Sample};

#[derive(Parser)]
#[command(name = "sievestream", version, about = "One-pass batch selection from data streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stream a record file through the configured selector.
    Select {
        #[arg(long)]
        input: PathBuf,
        /// Manifest path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write one record file per simulated round into a directory.
    Simulate {
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every configured algorithm over all rounds and write the per-round
    /// CSV plus a JSON summary next to it.
    Bench {
        #[arg(long)]
        output: PathBuf,
        /// Timed samples per speed cell; 0 skips the speed table.
        #[arg(long)]
        iterations: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Check the approximation guarantees on random small instances.
    Verify {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Perturb the sieve acceptance rule to check the checker.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// One algorithm, or a comma-separated list for bench.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    divide_k: Option<usize>,
    #[arg(long, value_enum)]
    cache: Option<Switch>,
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Select,
    Simulate,
    Bench,
}

impl Common {
    /// Config file values, then flag overrides.
    fn load(&self, mode: Mode) -> Result<Config, Error> {
        let mut kv = match &self.config {
            Some(path) => KeyValues::parse(&fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?)?,
            None => KeyValues::default(),
        };
        if let Some(seed) = self.seed {
            kv.set("simulator.seed", seed);
            kv.set("harness.seeds", seed);
        }
        match mode {
            Mode::Bench => {
                if let Some(a) = &self.algorithm {
                    kv.set("harness.algorithms", a);
                }
                if let Some(e) = self.epsilon {
                    kv.set("harness.epsilons", e);
                }
            }
            Mode::Select | Mode::Simulate => {
                if let Some(a) = &self.algorithm {
                    kv.set("selector.algorithm", a);
                }
                if let Some(e) = self.epsilon {
                    kv.set("selector.epsilon", e);
                }
            }
        }
        if let Some(k) = self.k {
            kv.set("selector.k", k);
        }
        if let Some(n) = self.divide_k {
            kv.set("harness.divide_k", n);
        }
        if let Some(c) = self.cache {
            kv.set("harness.cache", if matches!(c, Switch::On) { "on" } else { "off" });
        }
        let mut config = Config::from_key_values(&kv)?;
        if let (Some(seed), Some(s)) = (self.seed, config.selector.seed.as_mut()) {
            *s = seed;
        }
        Ok(config)
    }
}

enum Failure {
    Error(Error),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Error(e.into())
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Budget { .. } => 2,
        Error::Numeric { .. } | Error::DegenerateDuplicate { .. } | Error::StaleProbe => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Select { input, output, common } => cmd_select(&input, output.as_deref(), &common),
        Command::Simulate { output, common } => cmd_simulate(&output, &common),
        Command::Bench {
            output,
            iterations,
            common,
        } => cmd_bench(&output, iterations, &common),
        Command::Verify {
            instances,
            seed,
            output,
            inject_fault,
        } => cmd_verify(instances, seed, output.as_deref(), inject_fault),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    match path {
        Some(p) => fs::write(p, text + "\n")?,
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SelectManifest {
    format_version: u32,
    algorithm: String,
    k: usize,
    divide_k: usize,
    chosen: Vec<String>,
    selected: usize,
    objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sub_objectives: Option<Vec<f64>>,
    samples_seen: u64,
    stored_peak: usize,
    gain_evaluations: u64,
    kernel_evaluations: u64,
    cache_hits: u64,
}

fn count_records(path: &Path) -> Result<usize, Error> {
    let mut n = 0;
    for line in BufReader::new(File::open(path)?).lines() {
        n += usize::from(!line?.trim().is_empty());
    }
    Ok(n)
}

fn cmd_select(input: &Path, output: Option<&Path>, common: &Common) -> Result<(), Failure> {
    let config = common.load(Mode::Select)?;
    let spec = config.objective;
    let parts = config.harness.divide_k;
    let options = SelectorOptions {
        cache: config.harness.cache,
        ..SelectorOptions::default()
    };
    // Substream boundaries need the record count up front.
    let total = if parts > 1 { count_records(input)? } else { 0 };
    let sub_cfg = |i: usize| SelectorConfig {
        k: config.selector.k / parts,
        seed: config.selector.seed.map(|s| s.wrapping_add(i as u64)),
        ..config.selector
    };

    let mut manifest = SelectManifest {
        format_version: FORMAT_VERSION,
        algorithm: config.selector.label(),
        k: config.selector.k,
        divide_k: parts,
        chosen: Vec::new(),
        selected: 0,
        objective: 0.0,
        sub_objectives: None,
        samples_seen: 0,
        stored_peak: 0,
        gain_evaluations: 0,
        kernel_evaluations: 0,
        cache_hits: 0,
    };
    let mut chosen: Vec<Sample> = Vec::new();
    let mut subs = Vec::new();
    let mut part = 0;
    let mut selector = Selector::with_options(&spec, &sub_cfg(0), options)?;
    let mut finish = |selector: Selector, manifest: &mut SelectManifest| -> Result<(), Error> {
        let r = selector.finish()?;
        subs.push(r.value);
        manifest.samples_seen += r.samples_seen;
        manifest.stored_peak = manifest.stored_peak.max(r.stored_peak);
        manifest.gain_evaluations += r.gain_evaluations;
        manifest.kernel_evaluations += r.kernel_evaluations;
        manifest.cache_hits += r.cache_hits;
        chosen.extend(r.chosen);
        Ok(())
    };
    let reader = RecordReader::open(input)?;
    for (i, record) in reader.enumerate() {
        while parts > 1 && i >= (part + 1) * total / parts {
            part += 1;
            let next = Selector::with_options(&spec, &sub_cfg(part), options)?;
            finish(std::mem::replace(&mut selector, next), &mut manifest)?;
        }
        let (sample, _label) = record?.split();
        selector.push(sample)?;
    }
    finish(selector, &mut manifest)?;
    while parts > 1 && subs.len() < parts {
        subs.push(0.0);
    }

    manifest.objective = if parts > 1 {
        objective_value(&chosen, &spec)?
    } else {
        subs[0]
    };
    if parts > 1 {
        manifest.sub_objectives = Some(subs);
    }
    manifest.selected = chosen.len();
    manifest.chosen = chosen.into_iter().map(|s| s.id).collect();
    write_json(output, &manifest)
}

fn cmd_simulate(output: &Path, common: &Common) -> Result<(), Failure> {
    let config = common.load(Mode::Simulate)?;
    fs::create_dir_all(output)?;
    for round in 0..config.peculiarity.rounds {
        let records = generate_round(&config.world, &config.peculiarity, round)?;
        write_record_file(&output.join(format!("round-{round:03}.jsonl")), &records)?;
    }
    Ok(())
}

/// Worker cap from `SIEVESTREAM_THREADS`, defaulting to the available cores.
fn thread_cap() -> Result<usize, Error> {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var("SIEVESTREAM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!(
                "SIEVESTREAM_THREADS must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(available),
    }
}

fn cmd_bench(output: &Path, iterations: Option<usize>, common: &Common) -> Result<(), Failure> {
    let config = common.load(Mode::Bench)?;
    let mut cfg = ExperimentConfig::from_config(&config)?;
    cfg.threads = thread_cap()?;
    let iterations = iterations.unwrap_or(config.harness.iterations);

    let runs = harness::run_rounds(&cfg)?;
    let mut summary = harness::summarize(&runs);
    if iterations > 0 {
        summary.speed = Some(harness::measure_speed(&cfg, &config.harness.ks, iterations)?);
    }
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    harness::write_csv(File::create(output)?, &runs)?;
    write_json(Some(&output.with_extension("json")), &summary)
}

fn cmd_verify(instances: usize, seed: u64, output: Option<&Path>, inject_fault: bool) -> Result<(), Failure> {
    let options = SelectorOptions {
        fault_injection: inject_fault,
        ..SelectorOptions::default()
    };
    let report = harness::verify_guarantees_with(seed, instances, options)?;
    println!("instances: {}", report.instances);
    for (name, ratio) in &report.min_ratio {
        println!("min ratio {name}: {ratio:.6}");
    }
    println!("violations: {}", report.violations);
    println!("max log-det error: {:.3e}", report.max_logdet_error);
    println!("max inverse error: {:.3e}", report.max_inverse_error);
    if let Some(path) = output {
        write_json(Some(path), &report)?;
    }
    if report.passed() {
        println!("verification passed");
        return Ok(());
    }
    eprintln!("verification failed; worst instance:");
    if let Some(worst) = &report.worst {
        eprintln!(
            "{}",
            serde_json::to_string_pretty(worst).map_err(Error::from)?
        );
    }
    Err(Failure::Verification)
}
