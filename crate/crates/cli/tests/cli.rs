use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const RAMSEY: &str = r#"
seed = 3

[field]
magnitude = "5 T"

[bath]
model = "gaussian"
t2_star = "17 ns"
samples = 16

[experiment]
name = "ramsey"
tau = ["0 ns", "10 ns", "20 ns"]
points = 8
"#;

const T1: &str = r#"
[field]
magnitude = "5 T"

[experiment]
name = "t1"
waits = { start = "0 s", stop = "0.05 s", points = 11 }
"#;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn dir(&self) -> PathBuf {
        PathBuf::from(self.stdout.trim())
    }
}

fn donorspin(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_donorspin")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into(),
        stderr: String::from_utf8_lossy(&out.stderr).into(),
    }
}

fn config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.join("runs").display().to_string()
}

#[test]
fn simulate_writes_traces_and_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "ramsey.toml", RAMSEY);
    let r = donorspin(&["simulate", "--config", &cfg, "--out", &out_arg(tmp.path()), "--jobs", "1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let dir = r.dir();
    let name = dir.file_name().unwrap().to_string_lossy().to_string();
    assert!(name.contains("Z-") && name.len() > 20, "{name}");
    for f in ["ramsey_trace.csv", "ramsey_visibility.csv", "ramsey_meta.json", "config.toml"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let trace = fs::read_to_string(dir.join("ramsey_trace.csv")).unwrap();
    assert!(trace.starts_with('#'), "{trace}");
    assert!(trace.lines().any(|l| l.starts_with("tau_s,")), "{trace}");
    let meta = json(&dir.join("ramsey_meta.json"));
    assert_eq!(meta["seed"], 3);
    assert_eq!(meta["experiment"], "ramsey");
    assert!(meta["config"]["bath"]["samples"].as_i64() == Some(16));
    let resolved = fs::read_to_string(dir.join("config.toml")).unwrap();
    assert!(resolved.contains("seed = 3"));
}

#[test]
fn same_seed_gives_identical_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "ramsey.toml", RAMSEY);
    let out = out_arg(tmp.path());
    let a = donorspin(&["simulate", "--config", &cfg, "--out", &out, "--seed", "11"]);
    let b = donorspin(&["simulate", "--config", &cfg, "--out", &out, "--seed", "11", "--jobs", "1"]);
    assert_eq!((a.code, b.code), (0, 0), "{}{}", a.stderr, b.stderr);
    assert_ne!(a.dir(), b.dir());
    for f in ["ramsey_trace.csv", "ramsey_visibility.csv"] {
        assert_eq!(fs::read(a.dir().join(f)).unwrap(), fs::read(b.dir().join(f)).unwrap(), "{f}");
    }
    let c = donorspin(&["simulate", "--config", &cfg, "--out", &out, "--seed", "12"]);
    assert_ne!(fs::read(a.dir().join("ramsey_trace.csv")).unwrap(), fs::read(c.dir().join("ramsey_trace.csv")).unwrap());
}

#[test]
fn validation_errors_are_enumerated() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "bad.toml", "[field]\nmagnitude = \"5 s\"\n[experiment]\nname = \"spin-lock\"\n");
    let out = out_arg(tmp.path());
    let r = donorspin(&["simulate", "--config", &cfg, "--out", &out, "--set", "pulse.fwhm=2"]);
    assert_eq!(r.code, 2);
    for needle in ["field.magnitude", "pulse.fwhm", "experiment.name", "ramsey", "echo", "rabi"] {
        assert!(r.stderr.contains(needle), "{needle} not in {}", r.stderr);
    }
    assert!(!Path::new(&out).exists() || fs::read_dir(&out).unwrap().count() == 0);
}

#[test]
fn missing_files_are_io_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(tmp.path());
    let r = donorspin(&["simulate", "--config", "/nonexistent/run.toml", "--out", &out]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    let r = donorspin(&["fit", "--out", &out, "/nonexistent/echo.csv"]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    assert!(!Path::new(&out).exists() || fs::read_dir(&out).unwrap().count() == 0, "partial outputs left behind");
}

#[test]
fn overrides_reach_the_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "t1.toml", T1);
    let r = donorspin(&["simulate", "--config", &cfg, "--out", &out_arg(tmp.path()), "--set", "field.magnitude=4 T", "--set", "dissipators.t1=20 ms"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let meta = json(&r.dir().join("t1_meta.json"));
    assert_eq!(meta["config"]["field"]["magnitude"], "4 T");
    let t1 = meta["summary"]["t1_s"].as_f64().unwrap();
    assert!((t1 - 0.02).abs() < 0.02 * 0.02, "{t1}");
}

#[test]
fn estimate_reports_the_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let r = donorspin(&["estimate", "--out", &out_arg(tmp.path())]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = json(&r.dir().join("decoherence_budget.json"));
    let id = rep["budget"]["instantaneous_diffusion"]["t2"].as_f64().unwrap();
    assert!((id - 240e-6).abs() < 0.05 * 240e-6, "ID {id}");
    let sd = rep["budget"]["spectral_diffusion"]["t2"].as_f64().unwrap();
    assert!(sd > 200e-6 / 1.5 && sd < 200e-6 * 1.5, "SD {sd}");
    let star = rep["t2_star_theory"]["continuum_s"].as_f64().unwrap();
    assert!((6e-9..=14e-9).contains(&star), "T2* {star}");
    assert!(fs::read_to_string(r.dir().join("decoherence_budget.txt")).unwrap().contains("spectral-diffusion"));
}

#[test]
fn simulated_echo_is_fitted_with_model_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(tmp.path());
    let cfg = config(
        tmp.path(),
        "echo.toml",
        r#"
[dissipators]
ground_dephasing_time = "50 us"
t1 = "10 s"

# the echo separates from the unrefocused signals only under inhomogeneous broadening
[bath]
model = "gaussian"
t2_star = "17 ns"
samples = 1000

[experiment]
name = "echo"
total_time = { start = "5 us", stop = "150 us", points = 8 }
points = 8
"#,
    );
    let sim = donorspin(&["simulate", "--config", &cfg, "--out", &out]);
    assert_eq!(sim.code, 0, "{}", sim.stderr);
    let data = sim.dir().join("echo_amplitude.csv");
    let r = donorspin(&["fit", "--out", &out, "--model", "exp", "--compare", "exp,cubed_exp", data.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = json(&r.dir().join("exp_decay_report.json"));
    let time = rep["fit"]["parameters"].as_array().unwrap().iter().find(|p| p["name"] == "time").unwrap().clone();
    let t2 = time["value"].as_f64().unwrap();
    assert!((t2 - 50e-6).abs() < 0.05 * 50e-6, "T2 {t2}");
    assert!(time["stderr"].as_f64().is_some());
    let cmp = rep["fit"]["model_comparison"].as_array().unwrap();
    let names: Vec<&str> = cmp.iter().map(|m| m["model"].as_str().unwrap()).collect();
    assert!(names.contains(&"exp_decay") && names.contains(&"cubed_exp_decay"), "{names:?}");
    assert!(r.dir().join("exp_decay_curve.csv").is_file());
}

#[test]
fn field_sweep_recovers_the_t1_power_law() {
    let tmp = tempfile::tempdir().unwrap();
    // default waits span five T1 at every field
    let cfg = config(tmp.path(), "t1.toml", "[field]\nmagnitude = \"5 T\"\n[experiment]\nname = \"t1\"\n");
    let r = donorspin(&["sweep", "--config", &cfg, "--out", &out_arg(tmp.path()), "--axis", "field.magnitude", "--values", "2.25,3,4,5"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let summary = fs::read_to_string(r.dir().join("sweep_summary.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("field_magnitude_T,")), "{summary}");
    let meta = json(&r.dir().join("sweep_meta.json"));
    let slope = meta["trends"]["t1_s"]["log_log_slope"].as_f64().unwrap();
    assert!((slope + 3.5).abs() < 0.1, "slope {slope}");
    assert_eq!(meta["points"].as_array().unwrap().len(), 4);
    assert!(r.dir().join("point_000").join("t1_trace.csv").is_file());
}

#[test]
fn single_value_sweep_matches_simulate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "ramsey.toml", RAMSEY);
    let out = out_arg(tmp.path());
    let s = donorspin(&["sweep", "--config", &cfg, "--out", &out, "--axis", "field.magnitude", "--values", "5"]);
    let m = donorspin(&["simulate", "--config", &cfg, "--out", &out]);
    assert_eq!((s.code, m.code), (0, 0), "{}{}", s.stderr, m.stderr);
    for f in ["ramsey_trace.csv", "ramsey_visibility.csv"] {
        assert_eq!(fs::read(s.dir().join("point_000").join(f)).unwrap(), fs::read(m.dir().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn non_numeric_sweep_axis_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "ramsey.toml", RAMSEY);
    let out = out_arg(tmp.path());
    let r = donorspin(&["sweep", "--config", &cfg, "--out", &out, "--axis", "experiment.name", "--values", "1,2"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    let r = donorspin(&["sweep", "--config", &cfg, "--out", &out, "--axis", "field.magnitude", "--values", "strong"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}
