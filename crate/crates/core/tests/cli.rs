use std::process::{Command, Output};

use lecam::report::read_csv;

fn lecam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lecam")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, name: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{name} ")))
        .unwrap_or_else(|| panic!("no {name} in {text}"))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn pmf_prints_both_scales() {
    let o = lecam(&["pmf", "--dist", "hyper", "--N", "10", "--n", "5", "--Np", "5,5", "--k", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!((field(&text, "prob") - 100.0 / 252.0).abs() < 1e-14);
    assert!((field(&text, "log_prob") - (100.0f64 / 252.0).ln()).abs() < 1e-14);

    let o = lecam(&["pmf", "--dist", "multi", "--n", "1", "--Np", "1,2", "--k", "1"]);
    assert!((field(&stdout(&o), "prob") - 1.0 / 3.0).abs() < 1e-14);
}

#[test]
fn pmf_outside_support_is_zero() {
    let o = lecam(&["pmf", "--dist", "hyper", "--N", "10", "--n", "5", "--Np", "3,7", "--k", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(field(&text, "prob"), 0.0);
    assert!(text.contains("log_prob -inf"));
}

#[test]
fn exit_codes() {
    assert_eq!(lecam(&["pmf", "--dist", "hyper"]).status.code(), Some(2));
    assert_eq!(lecam(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lecam(&["bound-parts", "--N", "10", "--n", "5", "--Np", "4,5"]).status.code(), Some(3));
    assert_eq!(lecam(&["bound-parts", "--N", "10", "--n", "9", "--Np", "5,5"]).status.code(), Some(3));
    assert_eq!(lecam(&["lecam-scan", "--n", "", "--Np", "1,1"]).status.code(), Some(2));
    let capped = Command::new(env!("CARGO_BIN_EXE_lecam"))
        .args(["tv", "--pair", "hyper-multi", "--N", "400", "--n", "100", "--Np", "100,100,100,100"])
        .env("LECAM_SUPPORT_CAP", "1000")
        .output()
        .unwrap();
    assert_eq!(capped.status.code(), Some(4));
}

#[test]
fn ratio_reports_expansions() {
    let o = lecam(&["ratio", "--N", "10", "--n", "5", "--Np", "5,5", "--k", "2"]);
    let text = stdout(&o);
    assert!((field(&text, "exact") - (320.0f64 / 252.0).ln()).abs() < 1e-14);
    assert!((field(&text, "order1") - 0.2).abs() < 1e-14);
    assert!((field(&text, "order2") - 0.23).abs() < 1e-14);
}

#[test]
fn expansion_scan_writes_csv_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let o = lecam(&[
        "expansion-scan", "--N", "16,32,64,128,256", "--n", "8", "--Np", "1,1", "--k", "3", "--order", "2", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("slope -3.28"));
    let records = read_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(records.len(), 5);
    assert!(records.iter().all(|r| r.quantity == "residual2" && r.d == 1));

    let o = lecam(&["expansion-scan", "--N", "16,32,64,128", "--n", "1", "--Np", "1,1", "--k", "1"]);
    assert!(stdout(&o).contains("degenerate"));
}

#[test]
fn tv_pairs() {
    let jittered = lecam(&["tv", "--pair", "jitterhyper-jittermulti", "--N", "20", "--n", "6", "--Np", "5,7,8", "--method", "quad"]);
    let exact = lecam(&["tv", "--pair", "hyper-multi", "--N", "20", "--n", "6", "--Np", "5,7,8"]);
    assert!((field(&stdout(&jittered), "value") - field(&stdout(&exact), "value")).abs() < 1e-10);
    let same = lecam(&["tv", "--pair", "hyper-hyper", "--N", "20", "--n", "6", "--Np", "5,7,8"]);
    assert_eq!(field(&stdout(&same), "value"), 0.0);
    let json = lecam(&["tv", "--pair", "jittermulti-gauss", "--N", "64", "--n", "4", "--Np", "32,32", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["method"], "cube-quadrature");
}

#[test]
fn jobs_do_not_change_results() {
    let args = ["tv", "--pair", "jitterhyper-gauss", "--N", "1000", "--n", "40", "--Np", "250,750", "--method", "mc", "--samples", "50000", "--seed", "3"];
    let one = lecam(&[&["--jobs", "1"], &args[..]].concat());
    let four = lecam(&[&["--jobs", "4"], &args[..]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn lecam_scan_flags_regime_violations() {
    let o = lecam(&["lecam-scan", "--n", "4,8,16,32", "--N-rule", "n", "--Np", "1,1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.matches("regime_violation").count(), 4);
    assert!(text.contains("not fitted"));

    let o = lecam(&["lecam-scan", "--n", "4,16,64,256", "--Np", "1,1"]);
    let text = stdout(&o);
    let slope: f64 = text
        .lines()
        .find(|l| l.starts_with("fit ln TV(jittered multinomial"))
        .and_then(|l| l.split("slope ").nth(1))
        .and_then(|s| s.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((-0.65..=-0.35).contains(&slope));
}

#[test]
fn bound_parts_tail_and_dpi() {
    let o = lecam(&["bound-parts", "--N", "64", "--n", "16", "--Np", "32,32"]);
    let text = stdout(&o);
    assert_eq!(field(&text, "tail_sum"), 2.0);
    assert_eq!(field(&text, "n2_over_N"), 4.0);
    let o = lecam(&["tail-check", "--N", "40", "--n", "8", "--Np", "10,30", "--i", "1"]);
    assert!(stdout(&o).contains("holds true"));
    let o = lecam(&["dpi-check", "--N", "40", "--n", "6", "--Np", "20,20"]);
    assert!(field(&stdout(&o), "slack") >= -1e-8);
}
