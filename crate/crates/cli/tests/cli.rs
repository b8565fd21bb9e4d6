use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::NamedTempFile;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_audit-design")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn structured(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--out-format", "structured"]);
    let out = run(&all);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn file(contents: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn path(f: &NamedTempFile) -> &str {
    f.path().to_str().unwrap()
}

#[test]
fn summarize_small_plain_file() {
    let f = file("amount\n1\n2.00\n3\n");
    let v = structured(&["summarize", "--input", path(&f)]);
    let row = &v["population"][0];
    assert_eq!(row["N"], 3);
    assert_eq!(num(&row["mu_x"]), 2.0);
    assert!((num(&row["sigma2_x"]) - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(row["total"], "6.00");
    let human = String::from_utf8(run(&["summarize", "--input", path(&f)]).stdout).unwrap();
    assert!(human.contains("sigma2_x   0.666667"), "{human}");
}

#[test]
fn summarize_run_length_file() {
    let mut text = String::from("amount,count\n");
    for i in 0..100 {
        text.push_str(&format!("{}.{:02},210\n", 50 + 7 * i, i));
    }
    let f = file(&text);
    let v = structured(&["summarize", "--input", path(&f), "--format", "run-length"]);
    assert_eq!(v["population"][0]["N"], 21000);
    assert_eq!(v["population"][0]["unique"], 100);
}

#[test]
fn data_errors_exit_2() {
    let empty = file("");
    let out = run(&["summarize", "--input", path(&empty)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
    let bad = file("10\n1,000\n");
    let out = run(&["summarize", "--input", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(code(&["summarize", "--input", "/nonexistent/claims.txt"]), 2);
}

#[test]
fn usage_errors_exit_1() {
    let f = file("1\n2\n3\n");
    let p = path(&f);
    assert_eq!(code(&["summarize", "--input", p, "--bogus"]), 1);
    assert_eq!(code(&["simulate", "--input", p, "--pi", "0.2"]), 1);
    assert_eq!(code(&["plan", "--input", p, "--margin", "1", "--estimator", "ratio", "--partial", "0.3,0.1,0.5"]), 1);
    assert_eq!(code(&["plan", "--input", p, "--margin", "1", "--pi", "1.2"]), 1);
    assert_eq!(code(&["plan", "--input", p, "--margin", "1", "--confidence", "90"]), 1);
    assert_eq!(code(&["choose", "--input", p]), 1);
    assert_eq!(code(&["choose", "--input", p, "--pi", "0.5", "--replicates", "10"]), 1);
    assert_eq!(code(&["summarize"]), 1);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
}

fn column(v: &Value, table: &str, col: &str) -> Vec<Value> {
    v[table].as_array().unwrap().iter().map(|r| r[col].clone()).collect()
}

#[test]
fn ratio_plan_peaks_at_one_half() {
    let v = structured(&["plan", "--synthetic", "edwards-like", "--margin", "2%", "--estimator", "ratio", "--pi-grid", "0.05:0.95:0.01"]);
    let rows = v["plan"].as_array().unwrap();
    let rates = &rows[..rows.len() - 1];
    let best = rates.iter().max_by(|a, b| num(&a["n_formula"]).total_cmp(&num(&b["n_formula"]))).unwrap();
    assert_eq!(num(&best["pi"]), 0.5);
    assert_eq!(rows.last().unwrap()["source"], "conservative");
    assert_eq!(v["largest"][0]["n"], best["n"]);
}

#[test]
fn simple_plan_peaks_near_the_critical_rate() {
    let v = structured(&["plan", "--synthetic", "edwards-like", "--margin", "2%", "--pi-grid", "0.05:0.95:0.01"]);
    let rows = v["plan"].as_array().unwrap();
    let (rates, conservative) = rows.split_at(rows.len() - 1);
    let best = rates.iter().max_by(|a, b| num(&a["n_formula"]).total_cmp(&num(&b["n_formula"]))).unwrap();
    let crit = num(&conservative[0]["pi"]);
    assert!((num(&best["pi"]) - crit).abs() <= 0.10, "{best} vs {crit}");
    assert!(conservative[0]["n"].as_u64() >= best["n"].as_u64());
}

#[test]
fn generous_margin_needs_a_small_sample() {
    let f = file("10\n20\n30\n40\n50\n60\n70\n80\n90\n100\n");
    let v = structured(&["plan", "--input", path(&f), "--margin", "300", "--pi", "0.5"]);
    let row = &v["plan"][0];
    assert!(row["n"].as_u64().unwrap() <= 3);
    assert!(num(&row["achieved_margin"]) <= 300.0);
}

#[test]
fn choose_grid_is_monotone_and_favours_ratio() {
    let v = structured(&["choose", "--synthetic", "edwards-like", "--pi-grid", "0:1:0.05"]);
    assert_eq!(v["choose"][0]["recommendation"], "undefined");
    assert!(v["choose"][0]["prob_normal"].is_null());
    let probs: Vec<f64> = column(&v, "choose", "prob_normal").iter().skip(1).map(num).collect();
    assert!(probs.windows(2).all(|w| w[0] <= w[1]), "{probs:?}");
    assert!(probs.iter().all(|&p| p > 0.5));
    let constant = file("5\n5\n5\n5\n");
    let v = structured(&["choose", "--input", path(&constant), "--pi", "0.5"]);
    assert_eq!(v["choose"][0]["degenerate"], true);
    assert_eq!(v["choose"][0]["recommendation"], "indeterminate");
}

#[test]
fn stratify_beats_baselines() {
    let v = structured(&["stratify", "--synthetic", "edwards-like", "--pi-grid", "0.1:0.9:0.2"]);
    let rows = v["stratify"].as_array().unwrap();
    for block in rows.chunks(3) {
        assert_eq!(
            [&block[0]["design"], &block[1]["design"], &block[2]["design"]],
            ["optimal", "cum_sqrt_f", "srs"]
        );
        let obj: Vec<f64> = block.iter().map(|r| num(&r["objective"])).collect();
        assert!(obj[0] <= obj[1] && obj[0] <= obj[2], "{obj:?}");
    }
    let ratio: Vec<_> = rows
        .iter()
        .filter(|r| r["estimator"] == "ratio" && r["design"] == "optimal")
        .map(|r| (r["boundary_run"].clone(), r["boundary_split"].clone()))
        .collect();
    assert!(ratio.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn stratify_sizes_samples_and_flags_constant_populations() {
    let v = structured(&["stratify", "--synthetic", "edwards-like", "--pi", "0.3", "--margin", "2%", "--estimator", "ratio"]);
    let rows = v["stratify"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let target = 0.02 * 1_100_000.0;
    for r in rows {
        assert!(num(&r["achieved_margin"]) <= target * (1.0 + 1e-9), "{r}");
    }
    assert!(rows[0]["n"].as_u64() <= rows[2]["n"].as_u64());
    let constant = file("5\n5\n5\n");
    let v = structured(&["stratify", "--input", path(&constant), "--pi", "0.2"]);
    assert_eq!(v["stratify"][0]["degenerate"], true);
    assert!(v["stratify"][1]["objective"].is_null());
}

#[test]
fn simulate_is_byte_stable() {
    let args = [
        "simulate", "--synthetic", "edwards-like", "--pi-grid", "0:0.5:0.25", "--seed", "5", "--replicates", "200",
        "--scenario", "1,3", "--experiment", "both", "--margin", "3%", "--out-format", "delimited",
    ];
    let a = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let out = NamedTempFile::new().unwrap();
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path(&out)]);
    assert!(run(&with_out).status.success());
    assert_eq!(std::fs::read(out.path()).unwrap(), a.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let zero = text.lines().find(|l| l.starts_with("scenario1,0,")).unwrap();
    assert_eq!(zero, "scenario1,0,0,0,0,200,0");
}

#[test]
fn full_error_band_brackets_its_expectation() {
    let v = structured(&[
        "simulate", "--synthetic", "edwards-like", "--pi", "0.3", "--seed", "7", "--replicates", "300", "--scenario", "1",
    ]);
    let row = &v["bands"][0];
    let e = num(&row["full_error_expectation"]);
    assert!(num(&row["p05"]) < e && e < num(&row["p95"]), "{row}");
}
