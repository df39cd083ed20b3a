use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sievestream"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn manifest(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const MODULAR: &str = "objective.lambda_d = 0\nobjective.informativeness = precomputed-score\n\
selector.algorithm = entropy-topk\nselector.k = 2\n";

const THREE: &str = "{\"id\":\"a\",\"seq\":0,\"score\":0.3}\n{\"id\":\"b\",\"seq\":1,\"score\":0.9,\"label\":\"x\"}\n{\"id\":\"c\",\"seq\":2,\"score\":0.5}\n";

#[test]
fn select_modular_top_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.cfg", MODULAR);
    let input = write(dir.path(), "in.jsonl", THREE);
    let out = dir.path().join("manifest.json");
    let o = run(&[
        "select",
        "--input",
        input.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["format_version"], 1);
    assert_eq!(m["chosen"], serde_json::json!(["b", "c"]));
    assert!((m["objective"].as_f64().unwrap() - 1.4).abs() < 1e-12);

    // Same through a sieve selector with a flag override.
    let o = run(&[
        "select",
        "--input",
        input.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--algorithm",
        "sieve-streaming-pp",
        "--epsilon",
        "0.05",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&out)["chosen"], serde_json::json!(["b", "c"]));
}

#[test]
fn select_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.cfg", MODULAR);
    let input = write(dir.path(), "empty.jsonl", "");
    let out = dir.path().join("manifest.json");
    let o = run(&[
        "select",
        "--input",
        input.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let m = manifest(&out);
    assert_eq!(m["selected"], 0);
    assert_eq!(m["chosen"], serde_json::json!([]));
    assert_eq!(m["objective"], 0.0);
}

#[test]
fn select_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.cfg", MODULAR);
    let bad_cfg = write(dir.path(), "bad.cfg", "selector.colour = red\n");
    let input = write(dir.path(), "in.jsonl", THREE);
    let broken = write(dir.path(), "broken.jsonl", &format!("{THREE}{{\"id\":\"d\",\"seq\":1,\"score\":1}}\n"));
    let huge = write(
        dir.path(),
        "huge.jsonl",
        "{\"id\":\"a\",\"seq\":0,\"features\":[1e200],\"softmax\":[1.0]}\n",
    );

    let o = run(&["select", "--input", input.to_str().unwrap(), "--config", bad_cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = run(&["select", "--input", input.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--k", "0"]);
    assert_eq!(code(&o), 2);

    let o = run(&["select", "--input", broken.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));

    let o = run(&["select", "--input", huge.to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

fn simulate(dir: &Path, cfg_text: &str, name: &str) -> PathBuf {
    let cfg = write(dir, &format!("{name}.cfg"), cfg_text);
    let out = dir.join(name);
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let text = "simulator.rounds = 2\nsimulator.round_size = 50\nsimulator.replication = 4\n\
simulator.nonobject_count = 10\nsimulator.feature_dim = 8\n";
    let a = simulate(dir.path(), text, "a");
    let b = simulate(dir.path(), text, "b");
    for round in ["round-000.jsonl", "round-001.jsonl"] {
        let x = fs::read(a.join(round)).unwrap();
        assert_eq!(x, fs::read(b.join(round)).unwrap());
        assert_eq!(x.iter().filter(|&&c| c == b'\n').count(), 50);
    }
    assert!(!a.join("round-002.jsonl").exists());
}

#[test]
fn simulate_without_duplicates_or_filler_has_unique_groups() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(
        dir.path(),
        "simulator.rounds = 1\nsimulator.round_size = 40\nsimulator.replication = 0\nsimulator.nonobject_count = 0\n",
        "u",
    );
    let text = fs::read_to_string(out.join("round-000.jsonl")).unwrap();
    let groups: std::collections::HashSet<String> = text
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["group"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(groups.len(), 40);
}

#[test]
fn simulate_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "simulator.round_size = 7\nsimulator.replication = 4\n");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--output", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn preset_round_respects_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), "simulator.rounds = 1\n", "p");
    let input = out.join("round-000.jsonl");
    let text = fs::read_to_string(&input).unwrap();
    assert_eq!(text.lines().count(), 2048);
    let m = dir.path().join("m.json");
    let o = run(&["select", "--input", input.to_str().unwrap(), "--output", m.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&m);
    assert_eq!(m["algorithm"], "sieve-streaming-pp:k=128:eps=0.1");
    let selected = m["selected"].as_u64().unwrap();
    assert!(selected > 0 && selected <= 128);
    assert_eq!(m["samples_seen"], 2048);
}

#[test]
fn select_divided_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(
        dir.path(),
        "simulator.rounds = 1\nsimulator.round_size = 100\nsimulator.feature_dim = 8\nsimulator.nonobject_count = 20\n",
        "d",
    );
    let input = out.join("round-000.jsonl");
    let m = dir.path().join("m.json");
    let o = run(&[
        "select",
        "--input",
        input.to_str().unwrap(),
        "--output",
        m.to_str().unwrap(),
        "--k",
        "8",
        "--divide-k",
        "4",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&m);
    assert_eq!(m["sub_objectives"].as_array().unwrap().len(), 4);
    assert!(m["selected"].as_u64().unwrap() <= 8);
    assert_eq!(m["samples_seen"], 100);
}

const BENCH: &str = "simulator.rounds = 2\nsimulator.round_size = 100\nsimulator.feature_dim = 8\n\
simulator.nonobject_count = 20\nselector.k = 8\nharness.ks = 4, 8\n\
harness.algorithms = random, entropy-topk, sieve-streaming-pp\n";

fn bench(dir: &Path, text: &str, name: &str, extra: &[&str]) -> (String, Value) {
    let cfg = write(dir, &format!("{name}.cfg"), text);
    let out = dir.join(format!("{name}.csv"));
    let mut args = vec!["bench", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    (
        fs::read_to_string(&out).unwrap(),
        manifest(&out.with_extension("json")),
    )
}

fn algorithms(csv: &str) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for line in csv.lines().skip(1) {
        let a = line.split(',').nth(1).unwrap().to_string();
        if !seen.contains(&a) {
            seen.push(a);
        }
    }
    seen
}

#[test]
fn bench_row_groups_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, summary) = bench(dir.path(), BENCH, "a", &["--iterations", "100"]);
    assert_eq!(
        algorithms(&csv),
        ["random:k=8", "entropy-topk:k=8", "sieve-streaming-pp:k=8:eps=0.1"]
    );
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    assert_eq!(summary["format_version"], 1);
    assert_eq!(summary["speed"]["cells"].as_array().unwrap().len(), 6);
    let (again, _) = bench(dir.path(), BENCH, "b", &["--iterations", "0"]);
    assert_eq!(csv, again);
    // Latency columns stay empty in deterministic mode.
    assert!(csv.lines().nth(1).unwrap().contains(",,"));
}

#[test]
fn bench_epsilon_sweep_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{BENCH}harness.epsilons = 0.1, 0.05, 0.01\nharness.seeds = 1, 2, 3, 4, 5\nharness.record_latency = on\n"
    );
    let (csv, summary) = bench(dir.path(), &text, "s", &["--iterations", "0"]);
    let algs = algorithms(&csv);
    for eps in ["0.1", "0.05", "0.01"] {
        assert!(algs.contains(&format!("sieve-streaming-pp:k=8:eps={eps}")), "{algs:?}");
    }
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert!(!cols[6].is_empty() && !cols[7].is_empty(), "{line}");
    }
    assert!(summary.get("speed").is_none());
    let random = &summary["algorithms"][0];
    assert_eq!(random["seeds"], serde_json::json!([1, 2, 3, 4, 5]));
}

#[test]
fn bench_thread_cap_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "b.cfg", BENCH);
    let o = bin()
        .args(["bench", "--config", cfg.to_str().unwrap(), "--output"])
        .arg(dir.path().join("x.csv"))
        .args(["--iterations", "0"])
        .env("SIEVESTREAM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = bin()
        .args(["bench", "--config", cfg.to_str().unwrap(), "--output"])
        .arg(dir.path().join("y.csv"))
        .args(["--iterations", "0"])
        .env("SIEVESTREAM_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(dir.path().join("y.csv")).unwrap(),
        bench(dir.path(), BENCH, "z", &["--iterations", "0"]).0.into_bytes()
    );
}

#[test]
fn verify_default_suite_passes() {
    let o = run(&["verify"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("violations: 0"));
}

#[test]
fn verify_catches_injected_fault() {
    let o = run(&["verify", "--instances", "50", "--inject-fault"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("worst instance"));
}

#[test]
fn verify_fifty_instances_quickly() {
    let t = std::time::Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let o = run(&["verify", "--instances", "50", "--seed", "9", "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(t.elapsed().as_secs() < 10);
    assert_eq!(manifest(&out)["instances"], 50);
}
