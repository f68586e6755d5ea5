use std::path::Path;
use std::process::{Command, Output};

use mimo_secrecy::io::parse_boundary_csv;

const EXAMPLE: &str = r#"{"H1": [[2, 0.4]], "H2": [[0.4, 1]], "S": [[3.3333, 1.2346], [1.2346, 1.6667]]}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mimo-secrecy")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn region_writes_csv_witnesses_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ch.json", EXAMPLE);
    let out = dir.path().join("out");
    let o = run(&["region", "--input", &input, "--out", out.to_str().unwrap(), "--gamma0-samples", "21", "--plot"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("boundary.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# log_base=2"));
    assert_eq!(lines.next(), Some("gamma0,alpha,R0_bits,R1_bits"));
    assert!(!text.contains('\r'));
    let pts = parse_boundary_csv(&out.join("boundary.csv")).unwrap();
    assert_eq!(pts.len(), 21);
    assert!(pts.windows(2).all(|w| w[0].gamma0 < w[1].gamma0));
    assert!((pts[20].r0 - 1.033080).abs() < 1e-4, "{}", pts[20].r0);
    assert!((pts[0].r1 - 1.472754).abs() < 1e-4, "{}", pts[0].r1);
    assert!(out.join("boundary.witnesses.json").exists());
    let gp = std::fs::read_to_string(out.join("plot.gp")).unwrap();
    assert!(gp.contains("set datafile separator ','"));
    assert!(gp.contains("using 3:4"));
}

#[test]
fn region_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ch.json", EXAMPLE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["region", "--input", &input, "--out", out.to_str().unwrap(), "--gamma0-samples", "11"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let x = std::fs::read(a.join("boundary.csv")).unwrap();
    let y = std::fs::read(b.join("boundary.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn wiretap_with_identical_receivers_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ch.json", r#"{"H1": [[1, 0.5]], "H2": [[1, 0.5]], "P": 3}"#);
    let out = dir.path().join("out");
    let o = run(&["wiretap", "--input", &input, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("capacity 0.000000"), "{}", stdout(&o));
    assert!(out.join("wiretap.json").exists());
}

#[test]
fn enhance_verify_on_scalar_channel() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ch.json", r#"{"N1": [[1]], "N2": [[2]], "S": [[3]], "R0": 0.2}"#);
    let out = dir.path().join("out");
    let o = run(&["enhance-verify", "--input", &input, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("certificate.json")).unwrap()).unwrap();
    for key in ["residual_stationarity", "residual_slackness"] {
        let r = cert[key].as_f64().unwrap();
        assert!(r < 1e-6, "{key} = {r}");
    }
    assert!(out.join("enhancement_report.json").exists());
}

#[test]
fn reduce_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ch.json", r#"{"H1": [[1, 0], [0, 1]], "H2": [[0.5, 0], [0, 2]], "S": [[1, 1], [1, 1]]}"#);
    let out = dir.path().join("out");
    let o = run(&["reduce", "--input", &input, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("reduced.json").exists());
}

#[test]
fn parse_errors_exit_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.json", r#"{"H1": [[1, 0]], "H2": [[0, 1]], "S": [[1, 2], [2, 1]]}"#);
    let out = dir.path().join("out");
    let o = run(&["region", "--input", &input, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error[PARSE]"), "{}", stderr(&o));
    assert!(stderr(&o).contains("S is not positive semidefinite"), "{}", stderr(&o));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["region", "--input", dir.path().join("nope.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(run(&["region", "--gamma0-samples", "x"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}
