use std::path::Path;
use std::process::{Command, Output};

use pencil_core::pencil::{pencil_residual, Eigenpair};
use serde_json::Value;

fn pencil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pencil")).args(args).env_remove("PENCIL_PARALLELISM").output().unwrap()
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn eig_text_output() {
    let out = pencil(&["eig", "--order", "quadratic", "--l", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("lambda=-4"));
    assert!(text.contains("1 + -6*z^2 + 1*z^4"), "{text}");
}

#[test]
fn eig_json_round_trips_to_eigenpair() {
    let doc = json_stdout(&pencil(&["eig", "--order", "quartic", "--l", "5", "--family", "4", "--json"]));
    assert_eq!(doc["schema_version"], "1");
    assert_eq!(doc["config"]["command"], "eig");
    let pair: Eigenpair = serde_json::from_value(doc["result"].clone()).unwrap();
    assert_eq!((pair.l, pair.family, pair.lambda), (5, 4, -8));
    assert!(pencil_residual(&pair).is_zero());
}

#[test]
fn cracks_check_finds_the_symmetric_pair() {
    let doc = json_stdout(&pencil(&["cracks", "check", "--alphas", "-1,1", "--lmin", "2", "--lmax", "2", "--json"]));
    let v = &doc["result"]["verdicts"][0];
    assert_eq!(v["admissible"], true);
    assert_eq!(v["combo_coefficients"], serde_json::json!([1.0, 0.0]));
}

#[test]
fn cracks_enum_writes_csv_with_config_header() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("enum.csv");
    let out = pencil(&["cracks", "enum", "--m", "2", "--l", "3", "--ratios", "-1:1:1", "--csv", path_str(&csv)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let config: Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(config["command"], "cracks-enum");
    assert_eq!(lines.next(), Some("l,ratio,alpha1,alpha2"));
    assert!(lines.any(|l| l.starts_with("3,inf,")));
}

#[test]
fn expand_eval_grid_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("grid.csv");
    let out = pencil(&["expand", "eval", "--terms", r#"{"2":[1,0]}"#, "--grid", "z=-1:1:0.5,tau=0:2:1", "--csv", path_str(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(&csv).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["z", "tau", "x", "y", "w"]);
    let rows: Vec<Vec<f64>> = reader.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 15);
    for r in rows {
        // the leading combination vanishes on the rays x = ±(-y)
        let (z, tau, w) = (r[0], r[1], r[4]);
        if z.abs() == 1.0 {
            assert!(w.abs() < 1e-14);
        }
        assert!((w - (-2.0 * tau).exp() * (z * z - 1.0)).abs() < 1e-14);
    }
}

#[test]
fn verify_residuals_passes() {
    let out = pencil(&["verify", "--suite", "residuals", "--lmax", "30"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let report = &doc["result"][0];
    assert_eq!(report["suite"], "residuals");
    assert_eq!(report["failed"], 0);
    assert!(report["passed"].as_u64().unwrap() > 150);
}

#[test]
fn parse_errors_exit_two() {
    let out = pencil(&["eig", "--order", "quadratic", "--l", "minus-one"]);
    assert_eq!(out.status.code(), Some(2));
    let out = pencil(&["cracks", "check", "--alphas", "1,abc"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "parse");
    assert_eq!(pencil(&["--help"]).status.code(), Some(0));
}

#[test]
fn domain_errors_exit_one_with_json() {
    let out = pencil(&["ode", "crackcurves", "--ygrid=-2:0:0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["schema_version"], "1");
    assert_eq!(err["error"]["kind"], "domain");
    let out = pencil(&["eig", "--order", "quadratic", "--l", "0", "--family", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let json = dir.path().join(format!("{tag}.json"));
        let svg = dir.path().join(format!("{tag}.svg"));
        let csv = dir.path().join(format!("{tag}.csv"));
        let out = pencil(&[
            "--output", path_str(&json), "ode", "stationary", "--p", "3", "--json", "--svg", path_str(&svg), "--csv", path_str(&csv),
        ]);
        assert!(out.status.success());
        [json, svg, csv].map(|p| std::fs::read_to_string(p).unwrap())
    };
    let a = run("a");
    let b = run("b");
    // the file names differ, so compare with them masked
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.replace("/a.", "/?."), y.replace("/b.", "/?."));
    }
    let v1 = pencil(&["verify", "--suite", "roots", "--lmax", "20"]).stdout;
    let v2 = Command::new(env!("CARGO_BIN_EXE_pencil"))
        .args(["verify", "--suite", "roots", "--lmax", "20"])
        .env("PENCIL_PARALLELISM", "4")
        .output()
        .unwrap()
        .stdout;
    let strip = |v: &[u8]| {
        let mut doc: Value = serde_json::from_slice(v).unwrap();
        doc["config"]["parallelism"] = Value::Null;
        doc
    };
    assert_eq!(strip(&v1), strip(&v2));
}

#[test]
fn svg_is_well_formed_with_legend_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.svg");
    assert!(pencil(&["ode", "stationary", "--svg", path_str(&one)]).status.success());
    let text = std::fs::read_to_string(&one).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("path")).count(), 1);
    let meta = doc.descendants().find(|n| n.has_tag_name("metadata")).unwrap().text().unwrap();
    let config: Value = serde_json::from_str(meta).unwrap();
    assert_eq!(config["command"], "ode-stationary");

    let two = dir.path().join("two.svg");
    let out = pencil(&["expand", "trace", "--terms", r#"{"2":[1,0]}"#, "--samples", "90", "--svg", path_str(&two)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&two).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("path")).count(), 2);
    let legend = doc.descendants().find(|n| n.attribute("class") == Some("legend")).unwrap();
    assert_eq!(legend.children().filter(|n| n.has_tag_name("text")).count(), 2);
}

#[test]
fn selfsimilar_plot_uses_log_axis() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("ss.svg");
    let out = pencil(&["ode", "selfsimilar", "--xi-min", "1e-2", "--svg", path_str(&svg), "--json"]);
    let doc = json_stdout(&out);
    assert!(doc["result"]["zero_count"].as_u64().unwrap() >= 1);
    assert!(doc["result"]["max_residual"].as_f64().unwrap() <= 1e-9);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.contains(">1e-2<") && text.contains(">1e2<"));
}

#[test]
fn zero_parallelism_is_rejected() {
    let out = pencil(&["--parallelism", "0", "spectrum", "--order", "quadratic"]);
    assert_eq!(out.status.code(), Some(1));
}
