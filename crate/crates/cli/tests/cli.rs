use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ocpstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocpstab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn linear_config(alpha: f64) -> String {
    format!(r#"{{"m":1,"b":1,"a":1,"v0":0,"vt":20,"T":10,"alpha":{alpha},"dt":0.1}}"#)
}

const PENDULUM: &str = r#"{"m1":1,"m2":1,"k":1,"a":1,"x_target":2,"T":4,"alpha":0.01,"dt":0.2}"#;

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("error JSON on stderr")
}

fn solve_linear(dir: &TempDir, alpha: f64, scheme: &str) -> (Output, PathBuf, PathBuf) {
    let cfg = write(dir, "linear.json", &linear_config(alpha));
    let csv = dir.path().join("out.csv");
    let summary = dir.path().join("summary.json");
    let out = ocpstab(&[
        "solve-linear",
        "--config",
        cfg.to_str().unwrap(),
        "--scheme",
        scheme,
        "--out",
        csv.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    (out, csv, summary)
}

#[test]
fn solve_linear_smooth_case() {
    let dir = TempDir::new().unwrap();
    let (out, csv, summary) = solve_linear(&dir, 0.1, "mp");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,v,lambda,u,v_exact,lambda_exact,u_exact,abs_err_v"
    );
    assert_eq!(lines.count(), 101);
    assert!(!text.contains('\r'));
    let s = read_json(&summary);
    assert_eq!(s["stability"]["classification"], "Smooth");
    assert!(s["max_abs_err_v"].as_f64().unwrap() < 0.1);
}

#[test]
fn solve_linear_oscillatory_case() {
    let dir = TempDir::new().unwrap();
    let (out, _, summary) = solve_linear(&dir, 1e-3, "mp");
    assert!(out.status.success());
    let s = read_json(&summary);
    assert_eq!(s["stability"]["classification"], "Oscillatory");
    assert!(s["oscillation_index"].as_f64().unwrap() > 0.0);
}

#[test]
fn solve_linear_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (_, csv, summary) = solve_linear(&dir, 1e-2, "ie");
    let first = (fs::read(&csv).unwrap(), fs::read(&summary).unwrap());
    let (_, csv, summary) = solve_linear(&dir, 1e-2, "ie");
    assert_eq!(first, (fs::read(&csv).unwrap(), fs::read(&summary).unwrap()));
}

#[test]
fn summary_config_round_trips() {
    let dir = TempDir::new().unwrap();
    let (_, _, summary) = solve_linear(&dir, 0.1, "mp");
    let s = read_json(&summary);
    let again = write(&dir, "again.json", &s["config"].to_string());
    let cfg: Value = read_json(&again);
    let original: Value = serde_json::from_str(&linear_config(0.1)).unwrap();
    let (cfg, original) = (cfg.as_object().unwrap(), original.as_object().unwrap());
    assert_eq!(cfg.len(), original.len());
    for (k, v) in original {
        assert_eq!(cfg[k].as_f64(), v.as_f64(), "{k}");
    }
    let (out, _, _) = {
        let csv = dir.path().join("b.csv");
        let sum = dir.path().join("b.json");
        let out = ocpstab(&[
            "solve-linear",
            "--config",
            again.to_str().unwrap(),
            "--out",
            csv.to_str().unwrap(),
            "--summary",
            sum.to_str().unwrap(),
        ]);
        (out, csv, sum)
    };
    assert!(out.status.success());
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("o.csv");
    let sum = dir.path().join("s.json");
    for (name, text) in [
        ("malformed.json", "{not json"),
        ("both.json", r#"{"m":1,"b":1,"a":1,"v0":0,"vt":20,"T":10,"alpha":0.1,"dt":0.1,"N":100}"#),
        ("unknown.json", r#"{"m":1,"b":1,"a":1,"v0":0,"vt":20,"T":10,"alpha":0.1,"N":100,"x":1}"#),
        ("negative.json", r#"{"m":-1,"b":1,"a":1,"v0":0,"vt":20,"T":10,"alpha":0.1,"N":100}"#),
        ("step.json", r#"{"m":1,"b":1,"a":1,"v0":0,"vt":20,"T":10,"alpha":0.1,"dt":0.3}"#),
    ] {
        let cfg = write(&dir, name, text);
        let out = ocpstab(&[
            "solve-linear",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            csv.to_str().unwrap(),
            "--summary",
            sum.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert_eq!(stderr_json(&out)["error"], "config");
    }
    let out = ocpstab(&["stability", "--m", "1", "--b", "1", "--alpha", "0.1", "--dt", "0.1", "--scheme", "rk4"]);
    assert_eq!(out.status.code(), Some(2));
}

fn stability(alpha: &str, scheme: &str) -> Value {
    let out = ocpstab(&["stability", "--m", "1", "--b", "1", "--alpha", alpha, "--dt", "0.1", "--scheme", scheme]);
    assert!(out.status.success());
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn stability_reports() {
    let r = stability("1e-3", "mp");
    assert_eq!(r["classification"], "Oscillatory");
    assert!((r["alpha_threshold"].as_f64().unwrap() - 2.5063e-3).abs() < 1e-7);
    let r = stability("0.0025062656641604013", "mp");
    assert_eq!(r["classification"], "Boundary");
    let r = stability("0.010101010101010102", "ie");
    assert_eq!(r["classification"], "Boundary");
    // gamma dt = 2 to within 1e-9 but alpha just outside the threshold band
    let r = stability("0.0025062656679198", "mp");
    assert_eq!(r["classification"], "BlowUp");
    assert!(r["e1"].is_null());
    for key in ["gamma", "gamma_dt", "e1", "e2", "spectral_radius", "log_distance"] {
        assert!(stability("1e-1", "ie")[key].is_number(), "{key}");
    }
}

fn sweep(dir: &TempDir, args: &[&str], name: &str) -> String {
    let out_path = dir.path().join(name);
    let mut all = vec!["sweep", "--out", out_path.to_str().unwrap()];
    all.extend_from_slice(args);
    let out = ocpstab(&all);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    fs::read_to_string(out_path).unwrap()
}

#[test]
fn sweep_above_thresholds_is_smooth() {
    let dir = TempDir::new().unwrap();
    let text = sweep(
        &dir,
        &["--scheme", "ie", "--alpha-min", "0.5", "--alpha-max", "5", "--dt-min", "0.01", "--dt-max", "0.1", "--n", "6"],
        "s.csv",
    );
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "alpha,dt,class_numeric,class_analytic,osc_index,alpha_th"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 36);
    assert!(rows.iter().all(|r| r.contains(",Smooth,Smooth,")));
}

#[test]
fn sweep_rows_are_dt_major_and_independent_of_jobs() {
    let dir = TempDir::new().unwrap();
    let args = ["--scheme", "mp", "--alpha-min", "1e-4", "--alpha-max", "1", "--dt-min", "0.05", "--dt-max", "0.5", "--n", "8"];
    let mut one = args.to_vec();
    one.extend(["--jobs", "1"]);
    let mut four = args.to_vec();
    four.extend(["--jobs", "4"]);
    let a = sweep(&dir, &one, "a.csv");
    let b = sweep(&dir, &four, "b.csv");
    assert_eq!(a, b);
    let dts: Vec<f64> = a
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(dts.windows(2).all(|w| w[1] >= w[0]));
    assert!(dts[..8].iter().all(|&d| d == dts[0]));
}

#[test]
fn sweep_mp_oscillatory_region_is_inside_ie() {
    let dir = TempDir::new().unwrap();
    let args = |s| vec!["--scheme", s, "--alpha-min", "1e-5", "--alpha-max", "1", "--dt-min", "0.01", "--dt-max", "0.5", "--n", "12"];
    let mp = sweep(&dir, &args("mp"), "mp.csv");
    let ie = sweep(&dir, &args("ie"), "ie.csv");
    for (a, b) in mp.lines().zip(ie.lines()).skip(1) {
        let class = |l: &str| l.split(',').nth(3).unwrap().to_string();
        if class(a) != "Smooth" {
            assert_ne!(class(b), "Smooth", "{a} / {b}");
        }
    }
}

fn pendulum(dir: &TempDir, extra: &[&str]) -> (Output, PathBuf, PathBuf) {
    let cfg = write(dir, "pendulum.json", PENDULUM);
    let csv = dir.path().join("p.csv");
    let summary = dir.path().join("p.json");
    let mut args = vec![
        "pendulum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    (ocpstab(&args), csv, summary)
}

#[test]
fn pendulum_converges_with_fallback() {
    let dir = TempDir::new().unwrap();
    let (out, csv, summary) = pendulum(&dir, &["--alpha", "1e-3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("t,x1,x2x,x2y,v2x,v2y,u,lambda_norm\n"));
    assert_eq!(text.lines().count(), 22);
    let s = read_json(&summary);
    assert!(s["final_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(s["config"]["alpha"], 1e-3);
    assert!(s["continuation"]["used"].as_bool().unwrap());
}

#[test]
fn pendulum_without_fallback_reports_history() {
    let dir = TempDir::new().unwrap();
    let (out, _, _) = pendulum(&dir, &["--no-continuation"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "solver");
    assert_eq!(err["residual_history"].as_array().unwrap().len(), 51);
}
