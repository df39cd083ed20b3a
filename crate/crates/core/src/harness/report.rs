//! Per-round CSV and the JSON summary manifest.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{mean_stderr, AlgorithmRun, SpeedTable};
use crate::error::Result;

pub const FORMAT_VERSION: u32 = 1;

/// One CSV row: an algorithm's round averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub format_version: u32,
    pub algorithm: String,
    pub round: usize,
    pub selected: f64,
    pub unique: f64,
    pub objective: f64,
    /// Empty unless latency was recorded.
    pub latency_mean: Option<f64>,
    /// Across seeds with two or more seeds, otherwise across samples.
    pub latency_stderr: Option<f64>,
    /// Largest over seeds.
    pub stored_peak: usize,
    pub gain_evals: f64,
}

fn mean<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Groups runs by algorithm label, keeping first-appearance order.
fn by_algorithm(runs: &[AlgorithmRun]) -> Vec<(&str, Vec<&AlgorithmRun>)> {
    let mut groups: Vec<(&str, Vec<&AlgorithmRun>)> = Vec::new();
    for run in runs {
        match groups.iter_mut().find(|(a, _)| *a == run.algorithm) {
            Some((_, g)) => g.push(run),
            None => groups.push((&run.algorithm, vec![run])),
        }
    }
    groups
}

pub fn csv_rows(runs: &[AlgorithmRun]) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for (algorithm, group) in by_algorithm(runs) {
        let rounds = group.iter().map(|r| r.rounds.len()).min().unwrap_or(0);
        for i in 0..rounds {
            let reps: Vec<_> = group.iter().map(|r| &r.rounds[i]).collect();
            let lats: Vec<_> = reps.iter().filter_map(|r| r.latency).collect();
            let (latency_mean, latency_stderr) = match lats.len() {
                0 => (None, None),
                1 => (Some(lats[0].mean), Some(lats[0].stderr)),
                _ => {
                    let means: Vec<f64> = lats.iter().map(|l| l.mean).collect();
                    let (m, se) = mean_stderr(&means).unwrap_or_default();
                    (Some(m), Some(se))
                }
            };
            rows.push(CsvRow {
                format_version: FORMAT_VERSION,
                algorithm: algorithm.to_string(),
                round: reps[0].round,
                selected: mean(reps.iter().map(|r| r.selected_count as f64)),
                unique: mean(reps.iter().map(|r| r.unique_groups as f64)),
                objective: mean(reps.iter().map(|r| r.objective)),
                latency_mean,
                latency_stderr,
                stored_peak: reps.iter().map(|r| r.stored_peak).max().unwrap_or(0),
                gain_evals: mean(reps.iter().map(|r| r.gain_evaluations as f64)),
            });
        }
    }
    rows
}

pub fn write_csv<W: Write>(writer: W, runs: &[AlgorithmRun]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in csv_rows(runs) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub seeds: Vec<u64>,
    pub rounds: usize,
    /// Totals over all rounds, averaged over seeds.
    pub mean_total_selected: f64,
    pub mean_total_unique: f64,
    pub mean_total_nonobject: f64,
    pub mean_round_objective: f64,
    pub min_round_selected: usize,
    pub max_round_selected: usize,
    pub mean_total_gain_evaluations: f64,
    pub mean_total_kernel_evaluations: f64,
    pub max_stored_peak: usize,
    /// Per seed, unique groups summed over rounds.
    pub total_unique_per_seed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub format_version: u32,
    pub algorithms: Vec<AlgorithmSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub speed: Option<SpeedTable>,
}

impl ExperimentSummary {
    pub fn algorithm(&self, label: &str) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.algorithm == label)
    }
}

pub fn summarize(runs: &[AlgorithmRun]) -> ExperimentSummary {
    let algorithms = by_algorithm(runs)
        .into_iter()
        .map(|(algorithm, group)| {
            let all_rounds = || group.iter().flat_map(|r| r.rounds.iter());
            AlgorithmSummary {
                algorithm: algorithm.to_string(),
                seeds: group.iter().map(|r| r.seed).collect(),
                rounds: group.iter().map(|r| r.rounds.len()).max().unwrap_or(0),
                mean_total_selected: mean(group.iter().map(|r| r.total_selected() as f64)),
                mean_total_unique: mean(group.iter().map(|r| r.total_unique() as f64)),
                mean_total_nonobject: mean(
                    group
                        .iter()
                        .map(|r| r.rounds.iter().map(|x| x.nonobject).sum::<usize>() as f64),
                ),
                mean_round_objective: mean(all_rounds().map(|r| r.objective)),
                min_round_selected: all_rounds().map(|r| r.selected_count).min().unwrap_or(0),
                max_round_selected: all_rounds().map(|r| r.selected_count).max().unwrap_or(0),
                mean_total_gain_evaluations: mean(
                    group.iter().map(|r| r.total_gain_evaluations() as f64),
                ),
                mean_total_kernel_evaluations: mean(group.iter().map(|r| {
                    r.rounds.iter().map(|x| x.kernel_evaluations).sum::<u64>() as f64
                })),
                max_stored_peak: all_rounds().map(|r| r.stored_peak).max().unwrap_or(0),
                total_unique_per_seed: group.iter().map(|r| r.total_unique()).collect(),
            }
        })
        .collect();
    ExperimentSummary {
        format_version: FORMAT_VERSION,
        algorithms,
        speed: None,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Latency, RoundReport};
    use super::*;

    fn report(round: usize, selected: usize, latency: Option<f64>) -> RoundReport {
        RoundReport {
            round,
            selected_ids: (0..selected).map(|i| format!("x{i}")).collect(),
            selected_count: selected,
            unique_groups: selected,
            nonobject: 0,
            objective: selected as f64,
            sub_objective_sum: None,
            latency: latency.map(|m| Latency { mean: m, stderr: 0.5 }),
            stored_peak: selected,
            gain_evaluations: 10,
            kernel_evaluations: 20,
            cumulative: selected,
        }
    }

    fn run(algorithm: &str, seed: u64, selected: usize, latency: Option<f64>) -> AlgorithmRun {
        AlgorithmRun {
            algorithm: algorithm.into(),
            seed,
            rounds: vec![report(0, selected, latency), report(1, selected, latency)],
        }
    }

    #[test]
    fn rows_average_over_seeds() {
        let runs = [run("a", 0, 2, None), run("b", 0, 1, None), run("a", 1, 4, None)];
        let rows = csv_rows(&runs);
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0].algorithm.as_str(), rows[0].selected), ("a", 3.0));
        assert_eq!(rows[2].algorithm, "b");
        let mut buf = Vec::new();
        write_csv(&mut buf, &runs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "format_version,algorithm,round,selected,unique,objective,latency_mean,latency_stderr,stored_peak,gain_evals"
        );
        assert_eq!(text.lines().nth(1).unwrap(), "1,a,0,3.0,3.0,3.0,,,4,10.0");
    }

    #[test]
    fn stderr_over_repeats() {
        let runs = [run("a", 0, 1, Some(1.0)), run("a", 1, 1, Some(3.0))];
        let rows = csv_rows(&runs);
        assert_eq!(rows[0].latency_mean, Some(2.0));
        assert_eq!(rows[0].latency_stderr, Some(1.0));
        let single = csv_rows(&runs[..1]);
        assert_eq!(single[0].latency_stderr, Some(0.5));
    }

    #[test]
    fn summary_totals() {
        let s = summarize(&[run("a", 0, 2, None), run("a", 1, 4, None)]);
        let a = s.algorithm("a").unwrap();
        assert_eq!(a.mean_total_selected, 6.0);
        assert_eq!(a.total_unique_per_seed, vec![4, 8]);
        assert_eq!((a.min_round_selected, a.max_round_selected), (2, 4));
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["format_version"], 1);
    }
}
