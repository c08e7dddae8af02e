use std::path::Path;
use std::process::{Command, Output};

fn hola(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hola"))
        .current_dir(dir)
        .args(args)
        .env_remove("HOLA_THREADS")
        .output()
        .unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const BASE: [&str; 15] = [
    "run",
    "--potential",
    "gaussian",
    "--dim",
    "2",
    "--order",
    "3",
    "--gamma",
    "2",
    "--step",
    "0.05",
    "--steps",
    "1000",
    "--seed",
    "7",
];

#[test]
fn run_writes_samples_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = BASE.to_vec();
    args.extend(["--out", "s.csv"]);
    let out = hola(dir.path(), &args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "chain,step,x1_0,x1_1");
    assert_eq!(lines.len(), 1001);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 4));
    let report = json(&dir.path().join("s.report.json"));
    assert_eq!(report["grad_evals"], 1000 * 2 * 2);
    assert_eq!(report["config"]["seed"], 7);
    assert_eq!(report["moments"]["n_samples"], 1000);
}

#[test]
fn burnin_and_thin_shape_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = BASE.to_vec();
    args.extend([
        "--burnin", "100", "--thin", "3", "--chains", "2", "--out", "s.csv",
    ]);
    assert!(hola(dir.path(), &args).status.success());
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 300);
}

#[test]
fn missing_seed_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = hola(dir.path(), &["run", "--steps", "10", "--out", "s.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    assert!(!dir.path().join("s.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = BASE.to_vec();
    a.extend(["--chains", "8", "--threads", "1", "--out", "a.csv"]);
    let mut b = BASE.to_vec();
    b.extend(["--chains", "8", "--threads", "8", "--out", "b.csv"]);
    assert!(hola(dir.path(), &a).status.success());
    assert!(hola(dir.path(), &b).status.success());
    let first = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(first, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert!(hola(dir.path(), &a).status.success());
    assert_eq!(first, std::fs::read(dir.path().join("a.csv")).unwrap());
}

#[test]
fn jsonl_and_full_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = hola(
        dir.path(),
        &[
            "run",
            "--seed",
            "1",
            "--steps",
            "5",
            "--order",
            "4",
            "--format",
            "jsonl",
            "--full-state",
            "--out",
            "s.jsonl",
        ],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("s.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 5);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["x4_1"].is_number());
        assert_eq!(v.as_object().unwrap().len(), 2 + 4 * 2);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "seed = 5\nsteps = 20\nsampler = \"ula\"\nout = \"f.csv\"\n",
    )
    .unwrap();
    let out = hola(
        dir.path(),
        &["run", "--config", "run.toml", "--steps", "30"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    assert_eq!(text.lines().count(), 31);
    let report = json(&dir.path().join("f.report.json"));
    assert_eq!(report["sampler"], "ula");
    assert_eq!(report["grad_evals"], 30);
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = hola(
        dir.path(),
        &[
            "run",
            "--seed",
            "1",
            "--sampler",
            "ula",
            "--step",
            "2.5",
            "--steps",
            "5000",
            "--out",
            "d.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let report = json(&dir.path().join("d.report.json"));
    assert_eq!(report["diverged"], true);
}

#[test]
fn strict_guard_violation_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = hola(
        dir.path(),
        &[
            "run", "--seed", "1", "--step", "0.5", "--lambda", "1,2", "--strict", "--out", "g.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let out = hola(
        dir.path(),
        &[
            "run", "--seed", "1", "--step", "0.5", "--lambda", "1,2", "--steps", "10", "--out",
            "g.csv",
        ],
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn check_exit_codes_and_entries() {
    let dir = tempfile::tempdir().unwrap();
    let out = hola(dir.path(), &["check", "--out", "c.json"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("c.json"));
    let entries = report["theory"]["entries"].as_array().unwrap();
    for k in 3..=8 {
        for g in [0.5, 1.0, 2.0, 5.0] {
            for check in ["drift_norm", "reduced_spectrum"] {
                let n = entries
                    .iter()
                    .filter(|e| e["check"] == check && e["order"] == k && e["gamma"] == g)
                    .count();
                assert_eq!(n, 1, "{check} K={k} γ={g}");
            }
        }
    }
    let out = hola(
        dir.path(),
        &["check", "--fake-gamma-negative", "--out", "f.json"],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_requires_three_steps_and_reports_partial_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = hola(
        dir.path(),
        &[
            "sweep",
            "--sampler",
            "ula",
            "--h-list",
            "0.2,0.1",
            "--time",
            "10",
            "--seed",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let out = hola(
        dir.path(),
        &[
            "sweep",
            "--sampler",
            "ula",
            "--h-list",
            "0.4,0.2,0.1",
            "--time",
            "50",
            "--seed",
            "1",
            "--out",
            "ok.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(&dir.path().join("ok.json"));
    assert_eq!(r["result"]["errors"].as_array().unwrap().len(), 3);
    assert!(r["result"]["fitted_slope"].is_number());
    let out = hola(
        dir.path(),
        &[
            "sweep",
            "--sampler",
            "ula",
            "--h-list",
            "4,0.2,0.1",
            "--time",
            "3000",
            "--seed",
            "1",
            "--out",
            "bad.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let r = json(&dir.path().join("bad.json"));
    assert_eq!(r["result"]["partial"], true);
}

#[test]
fn plan_dump_is_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = hola(dir.path(), &["plan", "--order", "4", "--dump"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["linear_drift"].as_array().unwrap().len(), 4);
    assert_eq!(v["sigma_c"].as_array().unwrap().len(), 3 * 4);
    assert_eq!(v["nodes"].as_array().unwrap().len(), 3);
}
