use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn optrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optrec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn embedded_config(csv: &str) -> Value {
    let line = csv
        .lines()
        .find_map(|l| l.strip_prefix("# config: "))
        .expect("config header");
    serde_json::from_str(line).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn csv_header_names_version_and_config() {
    let o = optrec(&["quad-converge", "--rule", "trapezoid", "--f", "square"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        format!("# optrec {}", env!("CARGO_PKG_VERSION"))
    );
    let cfg = embedded_config(&text);
    assert_eq!(cfg["command"], "quad-converge");
    assert_eq!(cfg["seed"], 0);
    assert_eq!(cfg["params"]["f"], "square");
}

#[test]
fn trapezoid_exponent_near_two() {
    let o = optrec(&[
        "quad-converge",
        "--rule",
        "trapezoid",
        "--f",
        "exp",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["optrec"], env!("CARGO_PKG_VERSION"));
    let alpha = v["result"]["fit"]["exponent"].as_f64().unwrap();
    assert!((alpha - 2.0).abs() <= 0.1, "{alpha}");
}

#[test]
fn maxent_without_constraints_is_uniform() {
    let o = optrec(&["maxent", "solve", "--m", "5", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let p = v["result"]["p"].as_array().unwrap();
    assert_eq!(p.len(), 5);
    assert!(p.iter().all(|x| (x.as_f64().unwrap() - 0.2).abs() < 1e-10));
}

#[test]
fn factor_two_ratios_bounded() {
    let o = optrec(&[
        "equiv",
        "factor2",
        "--seeds",
        "1..10",
        "--samples",
        "2000",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v["result"].as_array().unwrap();
    assert_eq!(rows.len(), 10);
    for r in rows {
        assert!(r["row"]["ratio"].as_f64().unwrap() <= 2.0 + 1e-9);
    }
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"command":"quad-converge","seed":5,"params":{"rule":"simpson","f":"sin","ns":[2,4,8]}}"#,
    );
    let o = optrec(&[
        "--config",
        &cfg,
        "--seed",
        "9",
        "quad-converge",
        "--f",
        "cube",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let c = embedded_config(&stdout(&o));
    assert_eq!(c["seed"], 9);
    assert_eq!(c["params"]["f"], "cube");
    assert_eq!(c["params"]["rule"], "simpson");
    assert_eq!(c["params"]["ns"], serde_json::json!([2, 4, 8]));
}

#[test]
fn embedded_config_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = optrec(&[
        "--seed",
        "4",
        "quad-converge",
        "--rule",
        "monte-carlo",
        "--f",
        "sqrt",
        "--ns",
        "10,100,1000",
    ]);
    assert_eq!(first.status.code(), Some(0));
    let text = stdout(&first);
    let cfg = write(
        dir.path(),
        "resolved.json",
        &embedded_config(&text).to_string(),
    );
    let again = optrec(&["--config", &cfg]);
    assert_eq!(stdout(&again), text);
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let a = optrec(&[
        "estimate",
        "sweep",
        "--sigmas",
        "0.5",
        "--taus",
        "1,2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(a.status.code(), Some(0));
    assert!(a.stdout.is_empty());
    let b = optrec(&["estimate", "sweep", "--sigmas", "0.5", "--taus", "1,2"]);
    assert_eq!(std::fs::read(&out).unwrap(), b.stdout);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["spline", "fit", "--knots", "0,1,2", "--y", "1,2"],
        vec!["quad-converge", "--rule", "bogus"],
        vec!["--config", "/nonexistent/config.json", "quad-converge"],
        vec!["no-such-command"],
        vec!["maxent", "solve"],
    ] {
        let o = optrec(&args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn conflicting_config_command_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"command":"compare"}"#);
    assert_eq!(
        optrec(&["--config", &cfg, "quad-converge"]).status.code(),
        Some(2)
    );
    let bad = write(dir.path(), "d.json", r#"{"command":"compare","extra":1}"#);
    assert_eq!(optrec(&["--config", &bad]).status.code(), Some(2));
}

#[test]
fn numeric_and_io_errors_exit_three() {
    let o = optrec(&[
        "maxent",
        "solve",
        "--m",
        "3",
        "--rows",
        "[[1,2,3]]",
        "--y",
        "5",
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let o = optrec(&[
        "maxent",
        "solve",
        "--m",
        "3",
        "--out",
        "/nonexistent/dir/out.csv",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn thread_count_from_environment() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_optrec"))
            .env("OPTREC_THREADS", threads)
            .args(["equiv", "factor2", "--seeds", "1..4", "--samples", "1000"])
            .output()
            .unwrap()
    };
    let one = run("1");
    let four = run("4");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(optrec(&["--help"]).status.code(), Some(0));
    assert_eq!(optrec(&["--version"]).status.code(), Some(0));
}
