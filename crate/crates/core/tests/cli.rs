use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn icf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icf"))
        .args(args)
        .env_remove("ICF_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stem(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn summary(path: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(format!("{path}.json")).unwrap()).unwrap()
}

#[test]
fn spherical_sphere_reaches_the_equator() {
    let dir = tempfile::tempdir().unwrap();
    let out = stem(dir.path(), "sph");
    let o = icf(&["run", "--space", "spherical", "--f", "power-mean:1", "--init", "sphere:0.5773", "--grid", "32x16", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["termination"], "spherical_equator");
    // tan(rho0) = 0.5773 and sin(rho) grows like e^{t/2}
    let exact = -2.0 * 0.5773f64.atan().sin().ln();
    let est = s["T_star_estimate"].as_f64().unwrap();
    assert!(((est - exact) / exact).abs() < 1e-2, "{est} vs {exact}");
    assert_eq!(s["format_version"], 1);
}

#[test]
fn alpha_outside_the_range_is_rejected() {
    let o = icf(&["run", "--space", "euclidean", "--alpha", "1.5", "--f", "power-mean:1"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsafe-alpha"));
    let o = icf(&["run", "--space", "spherical", "--alpha", "0.5"]);
    assert_eq!(code(&o), 3);
    let o = icf(&["run", "--init", "cube:1"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn hyperbolic_outputs_follow_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = stem(dir.path(), "hyp");
    let o = icf(&[
        "run", "--space", "hyperbolic", "--f", "power-mean:2", "--init", "perturbed-sphere:0.76,0.05,1",
        "--grid", "32x16", "--t-end", "0.5", "--snap-every", "0.05", "--out", &out, "--svg",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(format!("{out}.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,kappa_min,kappa_max,pinch,q,F_min,F_max,dev,osc,convexity_margin");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 11);
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), 10);
        assert!((r[0] - 0.05 * k as f64).abs() < 1e-12);
        assert!(r[1] <= r[2] && r[3] >= 1.0 && r[9] > 0.0);
    }
    let s = summary(&out);
    assert_eq!(s["termination"], "t_end");
    assert_eq!(s["verdicts"]["asserted"], false);
    for key in ["t_final", "steps", "pinch_initial", "pinch_max", "q_initial", "q_final"] {
        assert!(s[key].is_number(), "{key}");
    }
    let svg = fs::read_to_string(format!("{out}.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}

#[test]
fn identical_runs_write_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (stem(dir.path(), "a"), stem(dir.path(), "b"));
    for out in [&a, &b] {
        let o = icf(&["run", "--init", "spheroid:1,1.2,1.5", "--grid", "32x16", "--t-end", "0.2", "--f", "elem-sym:2", "--out", out]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(fs::read(format!("{a}.csv")).unwrap(), fs::read(format!("{b}.csv")).unwrap());
    let s = summary(&a);
    assert_eq!(s["verdicts"]["asserted"], true);
    assert_eq!(s["verdicts"]["monotone_q"], true);
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.cfg");
    fs::write(&path, "# spheroid study\nspace = euclidean\ninit = spheroid:1,1.2,1.5\nalpha = 0.5\ngrid = 32x16\n").unwrap();
    let o = icf(&["run", "--config", path.to_str().unwrap(), "--alpha", "1", "--print-config"]);
    assert_eq!(code(&o), 0);
    let printed = String::from_utf8(o.stdout).unwrap();
    assert!(printed.contains("alpha = 1\n") && printed.contains("init = spheroid:1,1.2,1.5"));
    // the printed text is itself a valid config
    let again = dir.path().join("again.cfg");
    fs::write(&again, &printed).unwrap();
    let o = icf(&["run", "--config", again.to_str().unwrap(), "--print-config"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), printed);

    fs::write(&path, "alpha = quick\n").unwrap();
    assert_eq!(code(&icf(&["run", "--config", path.to_str().unwrap()])), 3);
}

#[test]
fn verify_command() {
    let o = icf(&["verify", "--f", "power-mean:2", "--n", "3", "--samples", "10000", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let o = icf(&["verify", "--f", "power-mean:-2", "--n", "2"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    let o = icf(&["verify", "--f", "dual:power-mean:1", "--n", "2"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("dual involution residual"));
    assert_eq!(code(&icf(&["verify", "--f", "power-mean:x"])), 3);
}

#[test]
fn oracle_command() {
    let o = icf(&["oracle", "--space", "hyperbolic", "--r0", "1", "--t", "2"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let radius: f64 = text.lines().next().unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    let exact = (1f64.sinh() * 1f64.exp()).asinh();
    assert!((radius - exact).abs() < 1e-10, "{radius} vs {exact}");
    assert_eq!(code(&icf(&["oracle", "--space", "spherical", "--r0", "0.5", "--t", "5"])), 3);
}

#[test]
fn duality_command() {
    let dir = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for (grid, cadence) in [("32x16", "0.05"), ("64x32", "0.025")] {
        let out = stem(dir.path(), &format!("dual_{grid}"));
        let o = icf(&[
            "run", "--space", "spherical", "--init", "spheroid:0.5,0.6,0.75", "--grid", grid, "--t-end", "0.2",
            "--snap-every", cadence, "--save-states", "--out", &out,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        dirs.push(format!("{out}_states"));
    }
    let o = icf(&["duality", &dirs[0]]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not computable"));
    let o = icf(&["duality", &dirs[1], &dirs[0]]);
    let text = String::from_utf8_lossy(&o.stdout).to_string();
    assert_eq!(code(&o), 0, "{text}");
    assert!(text.contains("32 -> 64"), "{text}");
}

#[test]
fn thread_override_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_icf"))
        .args(["oracle", "--space", "euclidean", "--r0", "1", "--t", "1"])
        .env("ICF_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_icf"))
        .args(["oracle", "--space", "euclidean", "--r0", "1", "--t", "1"])
        .env("ICF_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn finite_time_blowup_is_a_degeneration() {
    // with alpha > 1 the radius obeys r' = (r/2)^alpha and escapes in finite time
    let dir = tempfile::tempdir().unwrap();
    let out = stem(dir.path(), "blowup");
    let o = icf(&["run", "--unsafe-alpha", "--alpha", "4", "--init", "spheroid:1,1.5,3", "--grid", "16x8", "--t-end", "2", "--out", &out]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["termination"], "domain_violation");
    assert!(s["failure"].is_string());
}
