use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use anytime_core::harness::{
    CounterexampleConfig, CoverageConfig, LastIterateConfig, LilConfig, OjaColdConfig, WidthConfig,
};

const BIN: &str = env!("CARGO_BIN_EXE_anytime-iter");

fn run(args: &[&str], seed: Option<&str>) -> Output {
    let mut c = Command::new(BIN);
    c.args(args).env_remove("ANYTIME_ITER_SEED");
    if let Some(s) = seed {
        c.env("ANYTIME_ITER_SEED", s);
    }
    c.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SMALL_COVERAGE: &str = r#"{
  "problem": {"algorithm": "sgd_strongly_convex", "dim": 2, "lambda": 1.0,
              "b_noise": 0.5, "radius": 0.5, "b": 1.0},
  "boundary": {"kind": "sgd", "b": 1.0, "lambda": 1.0},
  "delta": 0.05,
  "n_reps": 12,
  "horizon": 3000,
  "seed_base": 4
}"#;

fn coverage_run(cfg: &Path, out: &Path, threads: &str, seed: Option<&str>) -> (Output, String) {
    let o = run(
        &[
            "coverage",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ],
        seed,
    );
    let report = fs::read_to_string(out.join("coverage_report.json")).unwrap_or_default();
    (o, report)
}

#[test]
fn coverage_writes_reports_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL_COVERAGE);
    let (o, a) = coverage_run(&cfg, &dir.path().join("a"), "1", None);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    let (_, b) = coverage_run(&cfg, &dir.path().join("b"), "3", None);
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let csv = fs::read_to_string(dir.path().join("a/widths.csv")).unwrap();
    assert!(csv.starts_with("t,width,q50,q90,q99\n"));
    let timing = fs::read_to_string(dir.path().join("a/timing.json")).unwrap();
    assert!(timing.contains("wall_time_s"));
    assert!(!a.contains("wall_time"));
}

#[test]
fn seed_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL_COVERAGE);
    let other = write(
        dir.path(),
        "d.json",
        &SMALL_COVERAGE.replace("\"seed_base\": 4", "\"seed_base\": 99"),
    );
    let (_, env) = coverage_run(&cfg, &dir.path().join("env"), "0", Some("99"));
    let (_, direct) = coverage_run(&other, &dir.path().join("direct"), "0", None);
    let (_, orig) = coverage_run(&cfg, &dir.path().join("orig"), "0", None);
    assert_eq!(env, direct);
    assert_ne!(env, orig);

    let (o, _) = coverage_run(&cfg, &dir.path().join("bad"), "0", Some("abc"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_config_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        "{\n  \"delta\": 0.05,\n  \"n_reps\": ,\n}",
    );
    let (o, _) = coverage_run(&cfg, &dir.path().join("o"), "1", None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("c.json:3:"), "{err}");

    let cfg = write(
        dir.path(),
        "u.json",
        &SMALL_COVERAGE.replace("\"n_reps\"", "\"n_rep\": 1, \"n_reps\""),
    );
    let (o, _) = coverage_run(&cfg, &dir.path().join("o"), "1", None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_rep"));

    let (o, _) = coverage_run(
        &dir.path().join("missing.json"),
        &dir.path().join("o"),
        "1",
        None,
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_pairing_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mismatch = SMALL_COVERAGE.replace(
        "\"delta\": 0.05",
        "\"schedule\": {\"kind\": \"inverse_time\", \"c\": 1.0, \"offset\": 3.0}, \"delta\": 0.05",
    );
    let cfg = write(dir.path(), "c.json", &mismatch);
    let (o, _) = coverage_run(&cfg, &dir.path().join("o"), "1", None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schedule"));

    let cfg = write(
        dir.path(),
        "d.json",
        &SMALL_COVERAGE.replace("\"delta\": 0.05", "\"delta\": 1.5"),
    );
    let (o, _) = coverage_run(&cfg, &dir.path().join("o"), "1", None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn threshold_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let shrunk = SMALL_COVERAGE.replace(
        "\"delta\": 0.05",
        "\"boundary_scale\": 0.001, \"delta\": 0.05",
    );
    let cfg = write(dir.path(), "c.json", &shrunk);
    let (o, report) = coverage_run(&cfg, &dir.path().join("o"), "1", None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    assert!(report.contains("\"pass\": false"));
}

#[test]
fn catalog_lists_every_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["catalog", "--out-dir", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8_lossy(&o.stdout);
    for label in ["conf", "sgd", "pl", "oja", "ridge"] {
        assert!(out.lines().any(|l| l.starts_with(label)), "{label} missing");
    }
    assert!(dir.path().join("catalog.json").exists());
    assert_eq!(
        run(&["catalog", "--delta", "0.5"], None).status.code(),
        Some(2)
    );
}

#[test]
fn stitch_dump_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"params": {"c1": 1, "c2": 1, "c3": 1, "terms_mean": [], "terms_mag": []},
            "delta": 0.01, "horizon": 100000}"#,
    );
    let o = run(
        &[
            "stitch-dump",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("stitch.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,eta,width"));
    let ts: Vec<u64> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(ts.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(ts[0], 1);
}

#[test]
fn small_experiments_run() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "last-iterate",
            r#"{"problem": {"dim": 2, "lambda": 1, "b_noise": 0.5, "radius": 0.5, "b": 1},
            "deltas": [0.1], "t_eval": 100, "n_reps": 50}"#,
            "last_iterate_report.json",
        ),
        (
            "width-table",
            r#"{"b": 1, "lambda": 1, "delta": 0.05, "horizons": [100, 1000]}"#,
            "width_table.csv",
        ),
        (
            "lil",
            r#"{"l1": 1, "l2": 1, "n_blocks": 8, "n_seeds": 4}"#,
            "lil_blocks.csv",
        ),
        (
            "counterexample",
            r#"{"p_one": 0.1, "n_reps": 400}"#,
            "counterexample_report.json",
        ),
        (
            "oja-cold-start",
            r#"{"eigs": [2, 1], "delta": 0.5, "c_stable": 6, "horizon": 500, "n_reps": 20}"#,
            "oja_cold_report.json",
        ),
    ];
    for (cmd, body, out) in cases {
        let cfg = write(dir.path(), &format!("{cmd}.json"), body);
        let od = dir.path().join(cmd);
        let o = run(
            &[
                cmd,
                "--config",
                cfg.to_str().unwrap(),
                "--out-dir",
                od.to_str().unwrap(),
            ],
            None,
        );
        assert!(
            matches!(o.status.code(), Some(0 | 1)),
            "{cmd}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(od.join(out).exists(), "{cmd} did not write {out}");
        assert!(String::from_utf8_lossy(&o.stdout).lines().count() >= 1);
    }
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&root).unwrap() {
        let p = entry.unwrap().path();
        let text = fs::read_to_string(&p).unwrap();
        let name = p.file_stem().unwrap().to_str().unwrap().to_string();
        let ok = match name.as_str() {
            n if n.ends_with("coverage") || n.ends_with("falsification") => {
                serde_json::from_str::<CoverageConfig>(&text)
                    .map(|c| c.validate().unwrap())
                    .is_ok()
            }
            "last_iterate" => serde_json::from_str::<LastIterateConfig>(&text).is_ok(),
            "width_table" => serde_json::from_str::<WidthConfig>(&text).is_ok(),
            "lil" => serde_json::from_str::<LilConfig>(&text).is_ok(),
            "oja_cold_start" => serde_json::from_str::<OjaColdConfig>(&text).is_ok(),
            "counterexample" => serde_json::from_str::<CounterexampleConfig>(&text).is_ok(),
            "stitch" => text.contains("\"params\""),
            other => panic!("unexpected config {other}"),
        };
        assert!(ok, "{name} does not parse");
        seen += 1;
    }
    assert!(seen >= 10);
}
