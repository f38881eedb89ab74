use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn chainopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chainopt")).args(args).env("CHAINOPT_THREADS", "1").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = chainopt(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn gen_toy(dir: &Path) -> String {
    let path = dir.join("toy.json");
    ok(&["gen", "--preset", "toy", "--seed", "3", "--out", path.to_str().unwrap()]);
    path.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn gen_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    ok(&["gen", "--preset", "toy", "--seed", "9", "--out", a.to_str().unwrap()]);
    ok(&["gen", "--preset", "toy", "--seed", "9", "--out", b.to_str().unwrap()]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn solve_outputs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let inst = gen_toy(dir.path());
    for algo in ["adpsa", "pso", "sa", "pseudo", "oracle"] {
        let runs: Vec<_> = (0..2).map(|i| dir.path().join(format!("{algo}-{i}"))).collect();
        for out in &runs {
            ok(&["solve", "--instance", &inst, "--algo", algo, "--iters", "30", "--seed", "5", "--out", out.to_str().unwrap()]);
        }
        for name in ["report.json", "trace.csv"] {
            assert_eq!(read(&runs[0], name), read(&runs[1], name), "{algo}/{name}");
        }
        assert!(runs[0].join("timing.csv").exists());
    }
}

#[test]
fn bench_paired_rows() {
    let dir = TempDir::new().unwrap();
    let inst = gen_toy(dir.path());
    let out = dir.path().join("bench");
    ok(&[
        "bench", "--instance", &inst, "--algos", "adpsa,pso,sa,pseudo", "--trials", "100", "--iters", "5", "--seed", "1",
        "--out", out.to_str().unwrap(),
    ]);
    let mut rdr = csv::Reader::from_path(out.join("trials.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 400);
    for t in 0..100 {
        let seeds: Vec<&str> = rows.iter().filter(|r| r[1] == *t.to_string()).map(|r| r.get(2).unwrap()).collect();
        assert_eq!(seeds.len(), 4);
        assert!(seeds.iter().all(|s| *s == seeds[0]));
    }
    for name in ["summary.json", "cdf_pso.csv", "cdf_sa.csv", "cdf_pseudo.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn bench_single_trial_and_repeatable() {
    let dir = TempDir::new().unwrap();
    let inst = gen_toy(dir.path());
    let outs: Vec<_> = (0..2).map(|i| dir.path().join(format!("b{i}"))).collect();
    for out in &outs {
        ok(&["bench", "--instance", &inst, "--trials", "1", "--iters", "10", "--seed", "4", "--out", out.to_str().unwrap()]);
    }
    for name in ["trials.csv", "summary.json", "cdf_pso.csv"] {
        assert_eq!(read(&outs[0], name), read(&outs[1], name), "{name}");
    }
}

#[test]
fn sweep_weights_sum_to_one() {
    let dir = TempDir::new().unwrap();
    let inst = gen_toy(dir.path());
    for runs in ["1", "12"] {
        let out = dir.path().join(format!("sweep{runs}"));
        ok(&["sweep", "--instance", &inst, "--runs", runs, "--iters", "5", "--seed", "2", "--out", out.to_str().unwrap()]);
        let mut rdr = csv::Reader::from_path(out.join("runs.csv")).unwrap();
        for row in rdr.records().map(Result::unwrap) {
            let s: f64 = (3..6).map(|i| row[i].parse::<f64>().unwrap()).sum();
            assert!((s - 1.0).abs() <= 1e-12, "{row:?}");
        }
        let summary: serde_json::Value = serde_json::from_slice(&read(&out, "summary.json")).unwrap();
        assert_eq!(summary["weights_sum_to_one"], true);
    }
}

#[test]
fn missing_instance_exits_4() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.json");
    let out = chainopt(&["solve", "--instance", missing.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn malformed_instance_exits_2() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"schema\": \"chainopt-instance/1\", \"params\": 3}").unwrap();
    let out = chainopt(&["solve", "--instance", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_on_full_scale_exits_3() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("t1.json");
    ok(&["gen", "--preset", "table1", "--seed", "1", "--out", inst.to_str().unwrap()]);
    let out_dir = dir.path().join("o");
    let out = chainopt(&["solve", "--instance", inst.to_str().unwrap(), "--algo", "oracle", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out_dir.join("report.json").exists());
}

#[test]
fn bad_flags_exit_2() {
    assert_eq!(chainopt(&["solve", "--bogus"]).status.code(), Some(2));
    assert_eq!(chainopt(&["solve", "--iters", "3", "--seconds", "1"]).status.code(), Some(2));
}
