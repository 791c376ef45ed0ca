use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn testdata(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/testdata")
        .join(name)
}

fn smtwcet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smtwcet"))
        .args(args)
        .env_remove("SMTWCET_SOLVER")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn diamond_source(n: usize) -> String {
    let mut s = format!("program diamond{n};\n");
    for i in 0..n {
        let _ = writeln!(s, "b{i} = nondet(0, 1);");
        let _ = writeln!(s, "if (b{i} == 1) {{ cost 2; }} else {{ cost 3; }}");
        let _ = writeln!(s, "if (b{i} == 1) {{ cost 3; }} else {{ cost 2; }}");
    }
    s
}

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn analyze_json(args: &[&str]) -> (Output, Value) {
    let mut all = vec!["analyze", "--output", "json"];
    all.extend_from_slice(args);
    let o = smtwcet(&all);
    let v = serde_json::from_slice(&o.stdout).unwrap_or(Value::Null);
    (o, v)
}

#[test]
fn rate_limiter_with_listed_costs() {
    let input = testdata("rate_limiter.json");
    let (o, v) = analyze_json(&["-i", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(v["syntactic_bound"], 39);
    assert_eq!(v["wcet"], 32);
    assert_eq!(v["improvement"], 7);
    assert!((v["diff_percent"].as_f64().unwrap() - 17.9).abs() < 0.05);
    assert_eq!(v["cuts"], 3);
    assert_eq!(v["sound"], true);
    assert_eq!(v["witness"]["cost"], 32);
    assert_eq!(v["witness"]["blocks"][0], "entry");
    assert!(v["witness"]["input_values"]["call"].is_i64());
    assert!(v["queries"].as_u64().unwrap() >= 2);
}

#[test]
fn reported_diff_matches_the_bounds() {
    let input = testdata("rate_limiter.json");
    for cuts in ["none", "leaves", "hierarchical"] {
        let (_, v) = analyze_json(&["-i", input.to_str().unwrap(), "--cuts", cuts]);
        let syn = v["syntactic_bound"].as_f64().unwrap();
        let wcet = v["wcet"].as_f64().unwrap();
        let diff = v["diff_percent"].as_f64().unwrap();
        assert!((diff - 100.0 * (syn - wcet) / syn).abs() < 1e-9);
    }
}

#[test]
fn json_report_round_trips_and_is_repeatable() {
    let input = testdata("rate_limiter.json");
    let (_, first) = analyze_json(&["-i", input.to_str().unwrap()]);
    let text = serde_json::to_string_pretty(&first).unwrap();
    let again: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(first, again);
    let (_, second) = analyze_json(&["-i", input.to_str().unwrap()]);
    assert_eq!(first["wcet"], second["wcet"]);
    assert_eq!(first["witness"]["cost"], second["witness"]["cost"]);
}

#[test]
fn text_report_names_the_essentials() {
    let input = testdata("rate_limiter.json");
    let o = smtwcet(&["analyze", "-i", input.to_str().unwrap()]);
    let out = stdout(&o);
    assert!(out.contains("syntactic   39"), "{out}");
    assert!(out.contains("wcet        32 (exact)"), "{out}");
    assert!(out.contains("diff        17.9% (7 cycles)"), "{out}");
    assert!(out.contains("cuts        3"), "{out}");
    assert!(out.contains("path        entry -> "), "{out}");
}

#[test]
fn diamond_of_five_with_leaf_cuts() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_temp(&dir, "diamond5.mini", &diamond_source(5));
    let (o, v) = analyze_json(&["-i", &input, "--cuts", "leaves"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(v["wcet"], 25);
    assert_eq!(v["syntactic_bound"], 30);
}

#[test]
fn missing_solver_fails_with_exit_1() {
    let input = testdata("rate_limiter.json");
    let o = smtwcet(&[
        "analyze",
        "-i",
        input.to_str().unwrap(),
        "--solver",
        "/nonexistent/solver",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("solve: "), "{}", stderr(&o));
}

#[test]
fn indecisive_search_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_temp(&dir, "diamond24.mini", &diamond_source(24));
    let (o, v) = analyze_json(&["-i", &input, "--cuts", "none", "--timeout-ms", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(v["sound"], false);
    assert!(v["wcet"].as_u64().unwrap() >= 120);
}

#[test]
fn counter_encoding_rejects_cut_ordered() {
    let input = testdata("rate_limiter.json");
    let o = smtwcet(&[
        "analyze",
        "-i",
        input.to_str().unwrap(),
        "--encoding",
        "counter",
        "--strategy",
        "cut-ordered",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sum encoding"), "{}", stderr(&o));
}

#[test]
fn parse_errors_carry_the_front_end() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_temp(&dir, "bad.mini", "x = nondet(0, 1);\nif (x > ) { }\n");
    let o = smtwcet(&["analyze", "-i", &input]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ir: "), "{}", stderr(&o));
}

#[test]
fn emit_smt_writes_both_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let input = testdata("rate_limiter.json");
    let o = smtwcet(&[
        "emit-smt",
        "-i",
        input.to_str().unwrap(),
        "--cuts",
        "leaves",
        "--emit-smt-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let with = std::fs::read_to_string(dir.path().join("rate_limiter.smt2")).unwrap();
    let without = std::fs::read_to_string(dir.path().join("rate_limiter.nocuts.smt2")).unwrap();
    let cuts = &with[with.find("; cuts\n").expect("cut section")..];
    assert!(cuts.contains("(<= cut_0 21)"), "{cuts}");
    assert!(cuts.contains("(<= cut_1 18)"), "{cuts}");
    assert!(cuts.contains("(<= cost 39)"), "{cuts}");
    assert!(!without.contains("; cuts"));
    assert!(!without.contains("cut_"));

    let again = tempfile::tempdir().unwrap();
    smtwcet(&[
        "emit-smt",
        "-i",
        input.to_str().unwrap(),
        "--cuts",
        "leaves",
        "--emit-smt-dir",
        again.path().to_str().unwrap(),
    ]);
    assert_eq!(
        with,
        std::fs::read_to_string(again.path().join("rate_limiter.smt2")).unwrap()
    );
}

#[test]
fn emit_smt_without_cuts_has_no_cut_assertions() {
    let dir = tempfile::tempdir().unwrap();
    let input = testdata("rate_limiter.json");
    smtwcet(&[
        "emit-smt",
        "-i",
        input.to_str().unwrap(),
        "--cuts",
        "none",
        "--emit-smt-dir",
        dir.path().to_str().unwrap(),
    ]);
    let with = std::fs::read_to_string(dir.path().join("rate_limiter.smt2")).unwrap();
    assert!(!with.contains("; cuts"));
    assert!(!with.contains("cut_"));
}

#[test]
fn emit_smt_into_a_missing_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no/such/dir");
    let input = testdata("rate_limiter.json");
    let o = smtwcet(&[
        "emit-smt",
        "-i",
        input.to_str().unwrap(),
        "--emit-smt-dir",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot write"), "{}", stderr(&o));
}

#[test]
fn oracle_on_the_rate_limiter() {
    let input = testdata("rate_limiter.json");
    let o = smtwcet(&["oracle", "-i", input.to_str().unwrap(), "--output", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["outcome"], "feasible");
    assert_eq!(v["wcet"], 32);
    assert_eq!(v["paths"], 4);
    let blocks: Vec<&str> = v["blocks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b.as_str().unwrap())
        .collect();
    assert_eq!(blocks, ["entry", "if.then", "if.end", "if.end6"]);
}

#[test]
fn oracle_refuses_thirty_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let mut src = String::from("x = nondet(0, 100);\n");
    for i in 0..30 {
        let _ = writeln!(src, "if (x > {i}) {{ cost 1; }}");
    }
    let input = write_temp(&dir, "wide.mini", &src);
    let o = smtwcet(&["oracle", "-i", &input]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("exceed the limit"), "{}", stderr(&o));
}

#[test]
fn bench_diamond_csv_has_both_curves() {
    let o = smtwcet(&["bench", "--diamond", "1..3", "--modes", "no-cuts,leaf-cuts"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("instance,mode,n,wcet,queries,wall_ms,verdict")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    for mode in ["no-cuts", "leaf-cuts"] {
        let wcets: Vec<&str> = rows.iter().filter(|r| r[1] == mode).map(|r| r[3]).collect();
        assert_eq!(wcets, ["5", "10", "15"]);
    }
}

#[test]
fn bench_above_optimum_reports_unsat() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scaling.csv");
    let o = smtwcet(&[
        "bench",
        "--diamond",
        "2,4",
        "--modes",
        "leaf-cuts",
        "--query",
        "above-optimum",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out).unwrap();
    assert_eq!(
        csv.lines().filter(|l| l.ends_with(",unsat")).count(),
        2,
        "{csv}"
    );
}

#[test]
fn bench_random_agrees_with_the_oracle() {
    let o = smtwcet(&[
        "bench",
        "--random",
        "5",
        "--seed",
        "40",
        "--modes",
        "no-cuts,hierarchical",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.ends_with(",true")), "{out}");
}

#[test]
fn bench_needs_a_workload() {
    let o = smtwcet(&["bench"]);
    assert_eq!(o.status.code(), Some(1));
}
