//! Behaviour of the `hypobridge` binary: formats, exit codes and determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

use hypobridge::commands::EIGS_HEADER;
use hypobridge::config::{ExperimentConfig, OracleSection, ProblemSection, SamplerSection};
use proptest::prelude::*;

fn run(dir: &Path, args: &[&str]) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_hypobridge"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs");
    status.status.code().expect("exit code")
}

const SOFT: [&str; 4] = ["--set", "problem.force.name=soft_well", "--set", "problem.force.params=1,1"];

fn args<'a>(cmd: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend_from_slice(extra);
    v
}

#[test]
fn eigs_table_format() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(dir.path(), &args("eigs", &["--set", "grid.J=128", "--set", "eigs.count=12"]));
    assert_eq!(code, 0);
    let text = fs::read_to_string(dir.path().join("eigs.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(EIGS_HEADER));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 12);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), 5);
        assert_eq!(r[0], (i + 1) as f64);
        assert!((r[3] - r[2].powi(4)).abs() <= 1e-12 * r[3]);
        assert!((r[1] - r[3]).abs() <= 0.02 * r[3], "row {i}: {r:?}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &args("eigs", &["--set", "grid.J=4"])), 2);
    assert_eq!(run(dir.path(), &args("eigs", &["--set", "grid.J=sixty"])), 2);
    assert_eq!(run(dir.path(), &args("eigs", &["--set", "problem.m=-1"])), 2);
    assert_eq!(run(dir.path(), &args("sample", &["--set", "problem.force.name=vortex"])), 2);
    assert_eq!(run(dir.path(), &["frobnicate"]), 2);
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "grid.J = 32\nmystery = 1\n").unwrap();
    assert_eq!(run(dir.path(), &["eigs", "--config", bad.to_str().unwrap()]), 2);
    // a threshold nobody can meet
    let mut strict = args("compare", &SOFT);
    strict.extend(["--set", "compare.z=1e-9", "--set", "sampler.n_steps=2000", "--set", "oracle.n_samples=1000"]);
    assert_eq!(run(dir.path(), &strict), 1);
    // a chain that blows up
    let blowup = args(
        "sample",
        &["--set", "problem.force.name=linear", "--set", "problem.force.params=1e6", "--set", "sampler.dtau=1", "--set", "sampler.n_steps=2000"],
    );
    assert_eq!(run(dir.path(), &blowup), 3);
}

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn sample_and_oracle_outputs_are_reproducible() {
    let small = ["--set", "sampler.n_steps=3000", "--set", "sampler.thin=10", "--set", "grid.J=16", "--seed", "7"];
    for cmd in ["sample", "oracle"] {
        let mut a = args(cmd, &SOFT);
        a.extend(small);
        a.extend(["--set", "oracle.rejection=true", "--set", "oracle.n_attempts=3000", "--set", "oracle.epsilon=0.2"]);
        let one = tempfile::tempdir().unwrap();
        let two = tempfile::tempdir().unwrap();
        assert_eq!(run(one.path(), &a), 0);
        assert_eq!(run(two.path(), &a), 0);
        let (x, y) = (outputs(one.path()), outputs(two.path()));
        assert!(!x.is_empty());
        assert_eq!(x, y, "{cmd}");
    }
    let dir = tempfile::tempdir().unwrap();
    let mut a = args("sample", &SOFT);
    a.extend(small);
    run(dir.path(), &a);
    let csv = fs::read_to_string(dir.path().join("snapshots.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..3], &["step", "tau", "x0_0"]);
    assert_eq!(header.len(), 2 + 17);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), (3000 - 600) / 10);
    let first: Vec<f64> = rows[0].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!((first[2], first[18]), (0.0, 1.0));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["functionals"][0]["name"], "x0(T/2)");
    assert_eq!(summary["samples_per_chain"], 240);
    let timing: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("timing.json")).unwrap()).unwrap();
    assert!(timing["seconds"].as_f64().unwrap() >= 0.0);

    let seeded = tempfile::tempdir().unwrap();
    let mut b = args("sample", &SOFT);
    b.extend(&small[..small.len() - 1]);
    b.push("8");
    run(seeded.path(), &b);
    assert_ne!(fs::read(seeded.path().join("snapshots.csv")).unwrap(), csv.as_bytes());
}

#[test]
fn linear_check_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let a = args("linear-check", &["--set", "grid.J=32", "--set", "sampler.n_steps=20000", "--set", "sampler.dtau=0.005"]);
    assert_eq!(run(dir.path(), &a), 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("linear_check.json")).unwrap()).unwrap();
    assert_eq!(report["greens"].as_array().unwrap().len(), 3);
    assert!(report["greens_order"].as_f64().unwrap() >= 1.5);
    assert!(report["mean_max_abs"].as_f64().unwrap() <= 1e-10);
    assert_eq!(report["modes"]["df"], 20);
    assert_eq!(report["pass"], true);
}

#[test]
fn json_only_and_csv_only() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &args("eigs", &["--set", "output.formats=json", "--set", "grid.J=16"]));
    assert!(!dir.path().join("eigs.csv").exists());
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &args("sample", &["--set", "output.formats=csv", "--set", "grid.J=16", "--set", "sampler.n_steps=1000"]));
    assert!(dir.path().join("snapshots.csv").exists());
    assert!(!dir.path().join("summary.json").exists());
}

fn word() -> impl Strategy<Value = String> {
    "[a-z_][a-z0-9_/.]{0,10}"
}

fn floats(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, n)
}

prop_compose! {
    fn config()(
        horizon in prop::num::f64::POSITIVE, mass in prop::num::f64::POSITIVE, dim in 1usize..4,
        x_minus in floats(0..4), x_plus in floats(0..4), force_name in word(), force_params in floats(0..5),
        intervals in 0usize..5000, eigs_count in 1usize..100,
        dtau in prop::num::f64::NORMAL, n_steps: usize, burn_in: Option<usize>, thin: usize, n_modes: Option<usize>,
        galerkin_fejer: bool, seed: u64, chains: usize,
        n_samples: usize, epsilon in prop::num::f64::NORMAL, n_sde_steps: usize, rejection: bool, n_attempts: usize,
        z_threshold in prop::num::f64::POSITIVE, directory in word(),
        formats in prop::sample::subsequence(vec!["csv".to_string(), "json".to_string()], 0..=2),
    ) -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemSection { horizon, mass, dim, x_minus, x_plus, force_name, force_params },
            intervals,
            eigs_count,
            sampler: SamplerSection { dtau, n_steps, burn_in, thin, n_modes, galerkin_fejer, seed, chains },
            oracle: OracleSection { n_samples, epsilon, n_sde_steps, rejection, n_attempts },
            z_threshold,
            directory,
            formats,
        }
    }
}

proptest! {
    #[test]
    fn config_round_trips(cfg in config()) {
        let text = cfg.to_text();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_text(), text);
    }
}
