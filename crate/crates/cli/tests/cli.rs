use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const LINEAR: &str = r#"
[slab]
g = 1
mu = 0.1
kappa = 0.0

[profile]
kind = "linear"
rho0 = 1.0
slope = 1.0
"#;

const SIM: &str = r#"
[run]
nx = 16
ny = 32
t_end = 0.5
init = "eigenfunction"
delta = 1e-4
dt = 0.01
linearized = true
"#;

fn nsk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsk-lab")).current_dir(dir).env("NSK_THREADS", "1").args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn threshold_of_the_linear_slab() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "lin.toml", LINEAR);
    let o = nsk(d.path(), &["threshold", "-c", "lin.toml", "-o", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(&d.path().join("out"));
    let kc = s["result"]["kappa_c"].as_f64().unwrap();
    assert!((kc - 0.0920).abs() < 1e-3 * 0.092, "{kc}");
    assert_eq!(s["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(s["grid"]["profile_n"], 256);
    assert!(s["tolerances"]["growth_fixed_point"].is_number());
    assert!(d.path().join("out/modes.csv").exists());
    let stdout: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stdout, s);
}

#[test]
fn empty_simulate_lists_required_keys() {
    let d = tempfile::tempdir().unwrap();
    let o = nsk(d.path(), &["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    for k in ["slab.g", "slab.mu", "profile.kind", "run.nx", "run.ny", "run.t_end", "run.init"] {
        assert!(e.contains(k), "{k} not named in: {e}");
    }
}

#[test]
fn misspelled_key_is_rejected_with_a_suggestion() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "lin.toml", &LINEAR.replace("kappa = 0.0", "kapa = 0.0"));
    let o = nsk(d.path(), &["growth", "-c", "lin.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("did you mean `slab.kappa`"), "{}", stderr(&o));
}

#[test]
fn type_mismatch_names_the_key() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "lin.toml", LINEAR);
    let o = nsk(d.path(), &["threshold", "-c", "lin.toml", "--set", "profile.n=many"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("profile.n"));
}

#[test]
fn overrides_win_and_are_echoed() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "lin.toml", LINEAR);
    let o = nsk(d.path(), &["threshold", "-c", "lin.toml", "--set", "slab.g=2", "--set", "profile.n=64", "-o", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(&d.path().join("out"));
    assert_eq!(s["spec"]["slab"]["g"], 2.0);
    assert_eq!(s["spec"]["slab"]["L"], 1.0);
    assert_eq!(s["overrides"][0], "slab.g=2");
    let kc = s["result"]["kappa_c"].as_f64().unwrap();
    assert!((kc - 0.184).abs() < 1e-3 * 0.184);
}

#[test]
fn kappa_sweep_crosses_the_threshold() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "lin.toml",
        &format!(
            "{}\n[sweep]\nparameter = \"kappa\"\nvalues = [0.8, 1.2]\nrelative = true\n",
            LINEAR.replace("kappa = 0.0\n", "")
        ),
    );
    let o = nsk(d.path(), &["sweep", "-c", "lin.toml", "--set", "profile.n=64", "-o", "sw"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(d.path().join("sw/sweep.csv")).unwrap();
    let lambdas: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    assert_eq!(lambdas.len(), 2);
    assert!(lambdas[0] > 0.0 && lambdas[1] == 0.0, "{lambdas:?}");
    assert!(d.path().join("sw/kappa_000/summary.json").exists());
    assert!(d.path().join("sw/kappa_001/w2.txt").exists());
}

#[test]
fn simulate_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "sim.toml", &format!("{LINEAR}{SIM}"));
    for out in ["a", "b"] {
        let o = nsk(
            d.path(),
            &["simulate", "-c", "sim.toml", "--set", "profile.n=64", "--set", &format!("output.dir=\"{out}\"")],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert_eq!(fs::read(a.join("series.csv")).unwrap(), fs::read(b.join("series.csv")).unwrap());
    assert_eq!(fs::read(a.join("final.bin")).unwrap(), fs::read(b.join("final.bin")).unwrap());
    let (sa, sb) = (summary(&a), summary(&b));
    assert_eq!(sa["result"], sb["result"]);
    assert_eq!(sa["result"]["steps"], 50);
}

#[test]
fn solver_failures_exit_with_3() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "sim.toml", &format!("{LINEAR}{SIM}"));
    let o = nsk(
        d.path(),
        &[
            "simulate",
            "-c",
            "sim.toml",
            "--set",
            "profile.n=64",
            "--set",
            "run.delta=100",
            "--set",
            "run.linearized=false",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("vacuum"));
}

#[test]
fn escape_writes_samples_and_fit() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "sim.toml", &format!("{LINEAR}{SIM}\n[escape]\ndeltas = [1e-3, 1e-2]\neps = 0.05\n"));
    let o = nsk(d.path(), &["escape", "-c", "sim.toml", "--set", "profile.n=64", "--set", "run.t_end=60", "-o", "esc"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(&d.path().join("esc"));
    assert_eq!(s["result"]["samples"].as_array().unwrap().len(), 2);
    assert!(s["result"]["fit"]["slope"].as_f64().unwrap() > 0.0);
    let csv = fs::read_to_string(d.path().join("esc/escape.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("delta,t_escape"));
}

#[test]
fn verify_runs_selected_criteria() {
    let d = tempfile::tempdir().unwrap();
    let o = nsk(d.path(), &["verify", "--criterion", "1", "--criterion", "4", "-o", "v"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("PASS [1]"));
    assert_eq!(summary(&d.path().join("v"))["result"]["passed"], 2);
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nsk-lab"))
        .current_dir(d.path())
        .env("NSK_THREADS", "zero")
        .args(["verify", "--criterion", "1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn density_wall_closure_is_selectable() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "lin.toml", &format!("{LINEAR}{SIM}"));
    let bad = nsk(d.path(), &["simulate", "-c", "lin.toml", "-s", "run.rho_wall=\"neumann\"", "-o", "bad"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("run.rho_wall"));
    let ok = nsk(d.path(), &["simulate", "-c", "lin.toml", "-s", "run.rho_wall=\"even\"", "-o", "even"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert_eq!(summary(&d.path().join("even"))["spec"]["run"]["rho_wall"], "even");
}
