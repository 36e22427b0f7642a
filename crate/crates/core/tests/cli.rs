mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use custseg::cli::main_with_args;
use custseg::engine::Assignment;
use custseg::io::{read_fixed_width, write_csv, write_fixed_width};
use custseg::Schema;

use common::*;

const RETAIL: &str = include_str!("../configs/retail.conf");

const PLANTED_EXACT: &str = "[schema]
id categorical identifier
x continuous active
y continuous active
z continuous active
[params]
mode = exact
";

struct Outcome {
    code: i32,
    out: String,
    err: String,
}

fn custseg(args: &[&str]) -> Outcome {
    let mut argv = vec!["custseg"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = main_with_args(argv, &mut out, &mut err);
    Outcome {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn synth_writes_data_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let r = custseg(&["synth", "--spec", "planted-4", "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(out.join("data.csv").exists() && out.join("truth.csv").exists());
    let data = fs::read_to_string(out.join("data.csv")).unwrap();
    assert_eq!(data.lines().count(), 2001);
}

#[test]
fn synth_same_seed_same_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spec.toml", include_str!("../configs/planted-4.toml"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(custseg(&["synth", "--spec", s(&spec), "--out", s(&a)]).code, 0);
    assert_eq!(custseg(&["synth", "--spec", s(&spec), "--out", s(&b)]).code, 0);
    for f in ["data.csv", "truth.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn synth_rejects_bad_proportions() {
    let dir = tempfile::tempdir().unwrap();
    let text = include_str!("../configs/planted-4.toml").replacen("proportion = 0.25", "proportion = 0.15", 1);
    let spec = write(dir.path(), "spec.toml", &text);
    let r = custseg(&["synth", "--spec", s(&spec), "--out", s(&dir.path().join("o"))]);
    assert_eq!(r.code, 2);
    assert!(r.err.contains("proportions sum to 0.9"), "{}", r.err);
    assert!(!dir.path().join("o/data.csv").exists());
}

#[test]
fn cleanse_reports_dropped_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "retail.conf", RETAIL);
    let input = write(
        dir.path(),
        "raw.csv",
        "customer_id,recency,total_profit,total_revenue,top_revenue_department\n\
         C1,3,10.5,100,Grocery\n\
         C2,,20,200,Home\n\
         C3,7,30,300,\n\
         C1,9,40,400,Toys\n\
         C4,1,5,50,Toys\n",
    );
    let (clean, report) = (dir.path().join("clean.csv"), dir.path().join("report.txt"));
    let r = custseg(&["cleanse", "--config", s(&config), "--in", s(&input), "--out", s(&clean), "--report", s(&report)]);
    assert_eq!(r.code, 0, "{}", r.err);
    let report = fs::read_to_string(report).unwrap();
    assert!(report.contains("rows_read 5\n"), "{report}");
    assert!(report.contains("rows_dropped 2\n"), "{report}");
    assert!(report.contains("dropped.missing_active 1\n"), "{report}");
    assert!(report.contains("dropped.duplicate_id 1\n"), "{report}");
    let kept: Vec<String> = fs::read_to_string(&clean).unwrap().lines().skip(1).map(|l| l[..2].to_string()).collect();
    assert_eq!(kept, ["C1", "C3", "C4"]);

    // A second pass over clean output changes nothing.
    let again = dir.path().join("again.csv");
    let r = custseg(&["cleanse", "--config", s(&config), "--in", s(&clean), "--out", s(&again), "--report", s(&dir.path().join("r2.txt"))]);
    assert_eq!(r.code, 0);
    assert_eq!(fs::read(&clean).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn cleanse_without_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "raw.csv", "customer_id\nC1\n");
    let p = |n: &str| dir.path().join(n);
    let r = custseg(&["cleanse", "--config", s(&p("missing.conf")), "--in", s(&input), "--out", s(&p("o.csv")), "--report", s(&p("r.txt"))]);
    assert_eq!(r.code, 2);
    assert!(r.err.contains("missing.conf"), "{}", r.err);
}

#[test]
fn cluster_with_one_cluster_puts_everyone_in_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    assert_eq!(custseg(&["synth", "--spec", "planted-4", "--out", s(&p("synth"))]).code, 0);
    let config = write(dir.path(), "one.conf", &format!("{PLANTED_EXACT}max_clusters = 1\n"));
    let r = custseg(&[
        "cluster", "--config", s(&config), "--in", s(&p("synth/data.csv")),
        "--out-flat", s(&p("flat.txt")), "--out-model", s(&p("model.txt")),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.starts_with("clusters: 1\ncluster 0: 2000\n"), "{}", r.out);
    let schema = custseg::config::Config::from_file(&config).unwrap().schema;
    let flat = read_fixed_width(&p("flat.txt"), &schema).unwrap();
    assert_eq!(flat.assignments.len(), 2000);
    assert!(flat.assignments.iter().all(|a| a.cluster_id == 0));
}

#[test]
fn cluster_table1_like_reports_four_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let config = write(dir.path(), "retail.conf", RETAIL);
    assert_eq!(custseg(&["synth", "--spec", "table1-like", "--out", s(&p("synth"))]).code, 0);
    let r = custseg(&[
        "cluster", "--config", s(&config), "--in", s(&p("synth/data.csv")),
        "--out-flat", s(&p("flat.txt")), "--out-model", s(&p("model.txt")), "--trace", s(&p("trace.log")),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.starts_with("clusters: 4\n"), "{}", r.out);
    let sizes: Vec<usize> = r.out.lines().skip(1).map(|l| l.rsplit(' ').next().unwrap().parse().unwrap()).collect();
    assert_eq!(sizes.iter().sum::<usize>(), 7894);
    assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
    assert!(fs::read_to_string(p("trace.log")).unwrap().lines().count() >= 1);
}

#[test]
fn cluster_unreadable_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let config = write(dir.path(), "retail.conf", RETAIL);
    let r = custseg(&[
        "cluster", "--config", s(&config), "--in", s(&p("nope.csv")),
        "--out-flat", s(&p("flat.txt")), "--out-model", s(&p("model.txt")),
    ]);
    assert_eq!(r.code, 2);
    assert!(!p("flat.txt").exists());
}

/// Writes the retail fixture as a clean CSV plus a flat file carrying
/// `labels`.
fn retail_inputs(dir: &Path, labels: impl Fn(usize) -> usize) -> (PathBuf, PathBuf, PathBuf) {
    let schema = Schema::retail();
    let (records, fixture_labels) = retail_fixture();
    let assignments: Vec<Assignment> = records
        .iter()
        .zip(&fixture_labels)
        .map(|(r, &c)| Assignment { record_id: r.id.clone(), cluster_id: labels(c), condorcet_value: 1.0, confidence: 1.0 })
        .collect();
    let (csv, flat) = (dir.join("t1.csv"), dir.join("t1.flat"));
    write_csv(&csv, &records, &schema).unwrap();
    write_fixed_width(&records, &assignments, &schema, &flat).unwrap();
    (write(dir, "retail.conf", RETAIL), csv, flat)
}

#[test]
fn profile_prints_retail_percentages() {
    let dir = tempfile::tempdir().unwrap();
    let (config, csv, flat) = retail_inputs(dir.path(), |c| c);
    let reports = dir.path().join("reports");
    let r = custseg(&["profile", "--config", s(&config), "--in", s(&csv), "--assignments", s(&flat), "--out", s(&reports)]);
    assert_eq!(r.code, 0, "{}", r.err);
    let rows: Vec<Vec<&str>> = r.out.lines().skip(1).map(|l| l.split_whitespace().collect()).collect();
    let expected = [("3", 6.16, 35.47), ("1", 75.72, 24.04), ("2", 6.70, 23.90), ("0", 11.43, 16.59)];
    assert_eq!(rows.len(), 4);
    for (row, (id, count_pct, rev_pct)) in rows.iter().zip(expected) {
        assert_eq!(row[1], id);
        assert!((row[5].parse::<f64>().unwrap() - count_pct).abs() <= 0.01, "{row:?}");
        assert!((row[6].parse::<f64>().unwrap() - rev_pct).abs() <= 0.01, "{row:?}");
    }
    for f in ["profiles.csv", "importance.csv", "histograms.csv"] {
        assert!(reports.join(f).exists(), "{f}");
    }
    let importance = fs::read_to_string(reports.join("importance.csv")).unwrap();
    assert!(importance.lines().skip(1).all(|l| l.starts_with("chi-square,")), "{importance}");
}

#[test]
fn profile_with_entropy_importance() {
    let dir = tempfile::tempdir().unwrap();
    let (config, csv, flat) = retail_inputs(dir.path(), |c| c);
    let reports = dir.path().join("reports");
    let r = custseg(&[
        "profile", "--config", s(&config), "--in", s(&csv), "--assignments", s(&flat), "--out", s(&reports),
        "--importance", "entropy",
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let importance = fs::read_to_string(reports.join("importance.csv")).unwrap();
    let rows: Vec<&str> = importance.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|l| l.starts_with("entropy,")), "{importance}");
}

#[test]
fn profile_rejects_unknown_cluster_ids() {
    let dir = tempfile::tempdir().unwrap();
    let (config, csv, flat) = retail_inputs(dir.path(), |c| c + 7);
    let r = custseg(&["profile", "--config", s(&config), "--in", s(&csv), "--assignments", s(&flat), "--out", s(&dir.path().join("r"))]);
    assert_eq!(r.code, 2);
    assert!(r.err.contains("max_clusters"), "{}", r.err);
}

#[test]
fn score_training_records_reproduces_assignments() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    assert_eq!(custseg(&["synth", "--spec", "planted-4", "--out", s(&p("synth"))]).code, 0);
    let config = write(dir.path(), "exact.conf", PLANTED_EXACT);
    let data = p("synth/data.csv");
    let r = custseg(&[
        "cluster", "--config", s(&config), "--in", s(&data), "--out-flat", s(&p("flat.txt")), "--out-model", s(&p("model.txt")),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let r = custseg(&["score", "--model", s(&p("model.txt")), "--in", s(&data), "--out", s(&p("scored.txt"))]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(fs::read(p("flat.txt")).unwrap(), fs::read(p("scored.txt")).unwrap());
}

#[test]
fn score_rejects_mismatched_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    assert_eq!(custseg(&["synth", "--spec", "planted-4", "--out", s(&p("synth"))]).code, 0);
    let config = write(dir.path(), "exact.conf", PLANTED_EXACT);
    let r = custseg(&[
        "cluster", "--config", s(&config), "--in", s(&p("synth/data.csv")),
        "--out-flat", s(&p("flat.txt")), "--out-model", s(&p("model.txt")),
    ]);
    assert_eq!(r.code, 0);
    let (_, csv, _) = retail_inputs(dir.path(), |c| c);
    let r = custseg(&["score", "--model", s(&p("model.txt")), "--in", s(&csv), "--out", s(&p("scored.txt"))]);
    assert_eq!(r.code, 2);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(custseg(&["frobnicate"]).code, 2);
    assert_eq!(custseg(&["cluster", "--config"]).code, 2);
    assert_eq!(custseg(&["--help"]).code, 0);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_custseg");
    let dir = tempfile::tempdir().unwrap();
    let ok = Command::new(bin).args(["synth", "--spec", "planted-4", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = Command::new(bin).args(["synth", "--spec", "no-such-spec", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(!bad.stderr.is_empty());
}
