use std::path::Path;
use std::process::{Command, Output};

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lasso-replica"))
        .args(args)
        .env("LASSO_REPLICA_OUT", dir)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn solve_prints_unregularized_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["solve", "--r", "0.5", "--eta", "0", "--sigma", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let p = &v["params"];
    for (key, want) in [("q0", 2.0), ("delta", 1.0), ("lambda", 1.0)] {
        assert!((p[key].as_f64().unwrap() - want).abs() < 1e-10, "{key}");
    }
    assert!((v["f_in_sample"].as_f64().unwrap() - 0.5).abs() < 1e-10);
    assert!(dir.path().join("solve.manifest.json").exists());
    assert!(dir.path().join("solution.json").exists());
}

#[test]
fn flat_landscape_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["solve", "--r", "2.5", "--eta", "0.05"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("flat"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[solve]\nratio = 0.5\n").unwrap();
    let out = cli(dir.path(), &["--config", cfg.to_str().unwrap(), "solve"]);
    assert_eq!(out.status.code(), Some(2));
    let out = cli(dir.path(), &["solve", "--r", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_values_are_used_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[solve]\nr = 0.25\neta1 = 0.0\n").unwrap();
    let out = cli(dir.path(), &["--config", cfg.to_str().unwrap(), "solve"]);
    assert!((json(&out)["params"]["q0"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-10);
    let out = cli(dir.path(), &["--config", cfg.to_str().unwrap(), "solve", "--r", "0.5"]);
    assert!((json(&out)["params"]["q0"].as_f64().unwrap() - 2.0).abs() < 1e-10);
}

#[test]
fn no_short_is_independent_of_eta1() {
    let dir = tempfile::tempdir().unwrap();
    let a = json(&cli(dir.path(), &["no-short", "--r", "1.2", "--eta1", "0"]));
    let b = json(&cli(dir.path(), &["no-short", "--r", "1.2", "--eta1", "0.3"]));
    assert_eq!(a["params"]["q0"], b["params"]["q0"]);
}

#[test]
fn feasibility_at_twice_the_observations() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["feasibility", "--N", "8", "--T", "4", "--samples", "4000", "--seed", "7"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["exact"].as_f64(), Some(0.5));
    assert_eq!(v["exact_fraction"].as_str(), Some("1/2"));
    let f = v["frequency"].as_f64().unwrap();
    let ci = v["ci95"].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() <= f && f <= ci[1].as_f64().unwrap());
    assert!((f - 0.5).abs() < 0.03);
}

fn sweep_run(dir: &Path) -> Vec<u8> {
    let out = cli(
        dir,
        &["sweep", "--r", "0.3,0.9,1.4", "--etas", "0.01,0.1", "--N", "20", "--samples", "8", "--seed", "5", "--svg"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(dir.join("sweep.csv")).unwrap()
}

#[test]
fn sweep_reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = sweep_run(a.path());
    assert_eq!(first, sweep_run(b.path()));
    let text = String::from_utf8(first).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("r,eta1,eta2,status,q0,"));
    assert_eq!(text.lines().count(), 1 + 6);
    let manifest = |d: &Path| std::fs::read_to_string(d.join("sweep.manifest.json")).unwrap();
    assert_eq!(manifest(a.path()), manifest(b.path()));
    assert!(a.path().join("sweep_q0.svg").exists());

    let c = tempfile::tempdir().unwrap();
    let out = cli(c.path(), &["--jobs", "1", "sweep", "--r", "0.3,0.9,1.4", "--etas", "0.01,0.1", "--N", "20", "--samples", "8", "--seed", "5"]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(c.path().join("sweep.csv")).unwrap(), text.as_bytes());
}

#[test]
fn staircase_and_contour_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["staircase", "--N", "20", "--T", "60", "--samples", "2", "--svg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("staircase.csv").exists() && dir.path().join("staircase.svg").exists());

    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[contour]\nr = { start = 0.1, stop = 1.9, count = 10 }\neta = [0.01, 0.1, 0.5]\nlevels = [1.21, 2.0]\n",
    )
    .unwrap();
    let out = cli(dir.path(), &["--config", cfg.to_str().unwrap(), "contour", "--svg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let q0 = std::fs::read_to_string(dir.path().join("contour_q0.csv")).unwrap();
    assert_eq!(q0.lines().count(), 1 + 30);
}
