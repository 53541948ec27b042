//! End-to-end tests of the `shcsp` binary: the exit-code contract of every
//! subcommand, determinism and seed overrides, and a schema check that
//! validates each emitted artifact (run records, index, flow CSVs, estimate
//! and certificate files) against its declared shape.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn ws(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .expect("workspace root")
        .join(rel)
}

fn program(name: &str) -> String {
    ws(&format!("programs/{name}")).to_str().unwrap().to_string()
}

/// Invoke the binary with a clean environment (no ambient seed override).
fn shcsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shcsp"))
        .args(args)
        .env_remove("SHCSP_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

// ---------------------------------------------------------------------------
// Artifact schema checks. Every file the CLI writes must satisfy these;
// simulation tests below funnel their output directories through here.
// ---------------------------------------------------------------------------

fn as_finite_f64(v: &Value, what: &str) -> f64 {
    let x = v.as_f64().unwrap_or_else(|| panic!("{what} is not a number: {v}"));
    assert!(x.is_finite(), "{what} is not finite: {x}");
    x
}

fn check_exact_keys(obj: &Value, keys: &[&str], what: &str) {
    let map = obj.as_object().unwrap_or_else(|| panic!("{what} is not an object"));
    let got: Vec<&str> = map.keys().map(String::as_str).collect();
    assert_eq!(got, keys, "{what} has unexpected keys");
}

fn check_run_record(v: &Value, what: &str) {
    check_exact_keys(v, &["seed", "exit", "final", "trace", "flow"], what);
    assert!(v["seed"].is_u64(), "{what}: seed");
    let exit = v["exit"].as_str().unwrap();
    assert!(
        ["terminated", "timeout", "deadlock", "step-limit"].contains(&exit),
        "{what}: unknown exit kind {exit}"
    );
    check_exact_keys(&v["final"], &["now", "vals"], &format!("{what}.final"));
    as_finite_f64(&v["final"]["now"], &format!("{what}.final.now"));
    for (k, val) in v["final"]["vals"].as_object().unwrap() {
        as_finite_f64(val, &format!("{what}.final.vals.{k}"));
    }
    for (i, item) in v["trace"].as_array().unwrap().iter().enumerate() {
        let what = format!("{what}.trace[{i}]");
        let obj = item.as_object().unwrap();
        if obj.contains_key("tau") {
            check_exact_keys(item, &["tau", "time"], &what);
            assert_eq!(item["tau"], Value::Bool(true), "{what}.tau");
        } else {
            check_exact_keys(item, &["chan", "value", "time"], &what);
            assert!(item["chan"].is_string(), "{what}.chan");
            as_finite_f64(&item["value"], &format!("{what}.value"));
        }
        as_finite_f64(&item["time"], &format!("{what}.time"));
    }
    check_exact_keys(&v["flow"], &["vars", "points"], &format!("{what}.flow"));
    let vars = v["flow"]["vars"].as_array().unwrap();
    assert!(vars.iter().all(Value::is_string), "{what}.flow.vars");
    let mut prev = f64::NEG_INFINITY;
    for (i, pt) in v["flow"]["points"].as_array().unwrap().iter().enumerate() {
        let what = format!("{what}.flow.points[{i}]");
        check_exact_keys(pt, &["time", "vals", "tr_len"], &what);
        let t = as_finite_f64(&pt["time"], &format!("{what}.time"));
        assert!(t >= prev, "{what}: flow times go backwards");
        prev = t;
        let vals = pt["vals"].as_array().unwrap();
        assert_eq!(vals.len(), vars.len(), "{what}: vals arity");
        for (j, val) in vals.iter().enumerate() {
            as_finite_f64(val, &format!("{what}.vals[{j}]"));
        }
        assert!(pt["tr_len"].is_u64(), "{what}.tr_len");
    }
}

fn check_index(v: &Value, what: &str) {
    check_exact_keys(
        v,
        &["runs", "seed", "dt", "tmax", "exits", "files", "errors"],
        what,
    );
    assert!(v["runs"].is_u64() && v["seed"].is_u64(), "{what}: counters");
    as_finite_f64(&v["dt"], &format!("{what}.dt"));
    as_finite_f64(&v["tmax"], &format!("{what}.tmax"));
    let mut tallied = 0u64;
    for (kind, count) in v["exits"].as_object().unwrap() {
        assert!(
            ["terminated", "timeout", "deadlock", "step-limit"].contains(&kind.as_str()),
            "{what}: unknown exit kind {kind}"
        );
        tallied += count.as_u64().unwrap();
    }
    let files = v["files"].as_array().unwrap();
    assert_eq!(tallied + v["errors"].as_array().unwrap().len() as u64,
        v["runs"].as_u64().unwrap(), "{what}: exits + errors must cover all runs");
    assert_eq!(files.len() as u64 + v["errors"].as_array().unwrap().len() as u64,
        v["runs"].as_u64().unwrap(), "{what}: files + errors must cover all runs");
    for err in v["errors"].as_array().unwrap() {
        check_exact_keys(err, &["run", "error"], &format!("{what}.errors[]"));
    }
}

fn check_flow_csv(text: &str, record: &Value, what: &str) {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_else(|| panic!("{what}: empty CSV"));
    let vars: Vec<&str> = record["flow"]["vars"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(
        header,
        format!("time,{},tr_len", vars.join(",")),
        "{what}: CSV header"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(
        rows.len(),
        record["flow"]["points"].as_array().unwrap().len(),
        "{what}: one CSV row per flow point"
    );
    for (i, row) in rows.iter().enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), vars.len() + 2, "{what} row {i}: arity");
        for f in &fields[..fields.len() - 1] {
            f.parse::<f64>().unwrap_or_else(|e| panic!("{what} row {i}: {f}: {e}"));
        }
        fields[fields.len() - 1]
            .parse::<u64>()
            .unwrap_or_else(|e| panic!("{what} row {i}: tr_len: {e}"));
    }
}

/// Validate every artifact in a simulation output directory.
fn check_simulation_dir(dir: &Path) -> Value {
    let index: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("index.json")).unwrap()).unwrap();
    check_index(&index, "index.json");
    for file in index["files"].as_array().unwrap() {
        let name = file.as_str().unwrap();
        let rec: Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap();
        check_run_record(&rec, name);
        let csv = dir.join(name.replace(".json", ".csv"));
        if csv.exists() {
            check_flow_csv(&std::fs::read_to_string(&csv).unwrap(), &rec, name);
        }
    }
    index
}

fn check_estimate(v: &Value, what: &str) {
    check_exact_keys(v, &["phat", "n", "lo", "hi", "verdict"], what);
    let (phat, lo, hi) = (
        as_finite_f64(&v["phat"], "phat"),
        as_finite_f64(&v["lo"], "lo"),
        as_finite_f64(&v["hi"], "hi"),
    );
    assert!(v["n"].is_u64(), "{what}.n");
    assert!((0.0..=1.0).contains(&phat) && lo <= phat && phat <= hi, "{what}: band order");
    assert!(
        ["holds", "fails", "inconclusive"].contains(&v["verdict"].as_str().unwrap()),
        "{what}: verdict"
    );
}

fn check_certificate(v: &Value, what: &str) {
    let obj = v.as_object().unwrap();
    for key in ["verdict", "bound", "smoothness", "lie", "premises", "conclusion"] {
        assert!(obj.contains_key(key), "{what}: missing {key}");
    }
    assert!(
        ["certified", "rejected", "unsupported"].contains(&v["verdict"].as_str().unwrap()),
        "{what}: verdict"
    );
    for (i, p) in v["premises"].as_array().unwrap().iter().enumerate() {
        check_exact_keys(
            p,
            &["name", "method", "passed", "detail"],
            &format!("{what}.premises[{i}]"),
        );
        assert!(p["passed"].is_boolean());
    }
}

// ---------------------------------------------------------------------------
// parse
// ---------------------------------------------------------------------------

#[test]
fn parse_valid_program_echoes_canonical_form() {
    let out = shcsp(&["parse", "--program", &program("aircraft.shcsp")]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let echoed = stdout(&out);
    // The echo is the canonical form: it re-parses and re-prints to itself.
    let reparsed = shcsp::syntax::parse(echoed.trim()).unwrap();
    assert_eq!(shcsp::syntax::pretty(&reparsed), echoed.trim());
}

#[test]
fn parse_rejects_invalid_programs_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    // Syntax error.
    let bad = dir.path().join("bad.shcsp");
    std::fs::write(&bad, "x := ;").unwrap();
    let out = shcsp(&["parse", "--program", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(!stderr(&out).is_empty());
    // Well-formed but invalid: parallel components sharing a variable.
    let shared = dir.path().join("shared.shcsp");
    std::fs::write(&shared, "x := 1 || x := 2").unwrap();
    let out = shcsp(&["parse", "--program", shared.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("x"), "diagnostic names the variable");
}

#[test]
fn parse_unreadable_file_is_exit_2() {
    let out = shcsp(&["parse", "--program", "/nonexistent/nowhere.shcsp"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_flags_are_usage_errors() {
    let out = shcsp(&["parse", "--no-such-flag"]);
    assert_eq!(code(&out), 2);
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[test]
fn simulate_writes_validated_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("runs");
    let out = shcsp(&[
        "simulate",
        "--program",
        &program("interrupt.shcsp"),
        "--runs",
        "5",
        "--seed",
        "3",
        "--csv",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let index = check_simulation_dir(&out_dir);
    assert_eq!(index["runs"], 5);
    assert_eq!(index["files"].as_array().unwrap().len(), 5);
    for i in 0..5 {
        assert!(out_dir.join(format!("run_{i:05}.csv")).exists(), "CSV for run {i}");
    }
}

#[test]
fn simulate_assign_reaches_the_expected_final_state() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("five.shcsp");
    std::fs::write(&src, "x := 5").unwrap();
    let out_dir = dir.path().join("runs");
    let out = shcsp(&[
        "simulate", "--program", src.to_str().unwrap(),
        "--runs", "1", "--seed", "0", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    check_simulation_dir(&out_dir);
    let rec: Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("run_00000.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(rec["exit"], "terminated");
    assert_eq!(rec["final"]["vals"]["x"].as_f64(), Some(5.0));
}

#[test]
fn simulate_zero_horizon_records_timeouts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("runs");
    let out = shcsp(&[
        "simulate",
        "--program",
        &program("brownian.shcsp"),
        "--runs",
        "3",
        "--seed",
        "1",
        "--tmax",
        "0",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let index = check_simulation_dir(&out_dir);
    assert_eq!(index["exits"]["timeout"], 3);
}

#[test]
fn simulate_failing_runs_exit_1_but_keep_the_index() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("unbound.shcsp");
    std::fs::write(&src, "x := y + 1").unwrap(); // y is never supplied
    let out_dir = dir.path().join("runs");
    let out = shcsp(&[
        "simulate", "--program", src.to_str().unwrap(),
        "--runs", "2", "--seed", "0", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("2 of 2"), "stderr: {}", stderr(&out));
    let index = check_simulation_dir(&out_dir);
    assert_eq!(index["errors"].as_array().unwrap().len(), 2);
    assert!(index["files"].as_array().unwrap().is_empty());
}

#[test]
fn simulate_rejects_bad_inputs_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("runs");
    for extra in [
        ["--init", "y0=half"],
        ["--dt", "0"],
        ["--repeat", "sometimes:3"],
    ] {
        let out = shcsp(&[
            "simulate", "--program", &program("brownian.shcsp"),
            "--runs", "1", "--seed", "0", "--out", out_dir.to_str().unwrap(),
            extra[0], extra[1],
        ]);
        assert_eq!(code(&out), 2, "args {extra:?}; stderr: {}", stderr(&out));
    }
}

#[test]
fn env_seed_override_wins_over_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let (via_env, via_flag) = (dir.path().join("env"), dir.path().join("flag"));
    let status = Command::new(env!("CARGO_BIN_EXE_shcsp"))
        .args([
            "simulate", "--program", &program("brownian.shcsp"),
            "--runs", "2", "--seed", "42", "--tmax", "0.1",
            "--out", via_env.to_str().unwrap(),
        ])
        .env("SHCSP_SEED", "7")
        .status()
        .unwrap();
    assert!(status.success());
    let out = shcsp(&[
        "simulate", "--program", &program("brownian.shcsp"),
        "--runs", "2", "--seed", "7", "--tmax", "0.1",
        "--out", via_flag.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    for name in ["index.json", "run_00000.json", "run_00001.json"] {
        assert_eq!(
            std::fs::read(via_env.join(name)).unwrap(),
            std::fs::read(via_flag.join(name)).unwrap(),
            "{name} differs between SHCSP_SEED=7 and --seed 7"
        );
    }
}

#[test]
fn repeat_policy_controls_loop_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("runs");
    let out = shcsp(&[
        "simulate", "--program", &program("repeat.shcsp"),
        "--runs", "1", "--seed", "0", "--repeat", "fixed:3",
        "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    check_simulation_dir(&out_dir);
    let rec: Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("run_00000.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(rec["final"]["vals"]["x"].as_f64(), Some(3.0));
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

fn write_formula(dir: &Path, text: &str) -> String {
    let path = dir.join("formula.txt");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn estimate_verdicts_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("P(x = 1 at 0) <= 0.3", 0),  // true probability 1/4, clear margin
        ("P(x = 1 at 0) <= 0.15", 1), // clearly violated
        ("P(x = 1 at 0) <= 0.25", 3), // threshold inside the band
    ];
    for (formula, expected) in cases {
        let path = write_formula(dir.path(), formula);
        let out = shcsp(&[
            "estimate", "--program", &program("pchoice.shcsp"),
            "--runs", "2000", "--seed", "11", "--formula", &path,
        ]);
        assert_eq!(code(&out), expected, "{formula}; stderr: {}", stderr(&out));
        let est: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
        check_estimate(&est, formula);
    }
}

#[test]
fn estimate_writes_the_json_it_prints() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_formula(dir.path(), "P(x = 1 at 0) <= 0.3");
    let out_dir = dir.path().join("est");
    let out = shcsp(&[
        "estimate", "--program", &program("pchoice.shcsp"),
        "--runs", "500", "--seed", "2", "--formula", &path,
        "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let on_disk = std::fs::read_to_string(out_dir.join("estimate.json")).unwrap();
    assert_eq!(on_disk.trim(), stdout(&out).trim());
    check_estimate(&serde_json::from_str(on_disk.trim()).unwrap(), "estimate.json");
}

#[test]
fn estimate_rejects_formula_fragments_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for fragment in ["P(x = 1 at 0)", "x = 1 at 0", "P(x = 1 at 0) <= 3/2"] {
        let path = write_formula(dir.path(), fragment);
        let out = shcsp(&[
            "estimate", "--program", &program("pchoice.shcsp"),
            "--runs", "10", "--seed", "0", "--formula", &path,
        ]);
        assert_eq!(code(&out), 2, "fragment {fragment:?} should be rejected");
    }
}

#[test]
fn estimate_trace_formula_on_the_handshake() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_formula(dir.path(), "P(tr = <c.3, 0> at 0) >= 0.9");
    let out = shcsp(&[
        "estimate", "--program", &program("comm.shcsp"),
        "--runs", "400", "--seed", "5", "--formula", &path,
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
}

// ---------------------------------------------------------------------------
// certify / lie
// ---------------------------------------------------------------------------

#[test]
fn certify_exit_codes_follow_the_verdict() {
    let cases = [
        ("requests/contracting.json", 0),
        ("requests/contracting_reject.json", 1),
        ("requests/aircraft_abs.json", 3),
        ("requests/aircraft_abs_reject.json", 1),
    ];
    for (req, expected) in cases {
        let out = shcsp(&["certify", "--request", ws(req).to_str().unwrap()]);
        assert_eq!(code(&out), expected, "{req}; stderr: {}", stderr(&out));
        let cert: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
        check_certificate(&cert, req);
        assert!(stderr(&out).contains("verdict:"), "{req}: human report on stderr");
    }
}

#[test]
fn certify_writes_certificate_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("cert");
    let out = shcsp(&[
        "certify", "--request", ws("requests/contracting.json").to_str().unwrap(),
        "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let json = std::fs::read_to_string(out_dir.join("certificate.json")).unwrap();
    assert_eq!(json.trim(), stdout(&out).trim());
    check_certificate(&serde_json::from_str(&json).unwrap(), "certificate.json");
    let report = std::fs::read_to_string(out_dir.join("certificate.txt")).unwrap();
    assert!(report.contains("verdict: certified"));
    assert!(report.contains("[pass] lie-nonpos"));
}

#[test]
fn certify_rejects_malformed_requests_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"block": "skip", "f": "s", "lam": "1", "p": "1", "init": {}, "box": {}, "grid": 3}"#).unwrap();
    let out = shcsp(&["certify", "--request", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("block"), "stderr names the field");
}

#[test]
fn lie_prints_the_simplified_generator() {
    let cases = [
        ("aircraft_sym.shcsp", "y*y", "2*v*y*sin(theta) + 1"),
        ("contract1d.shcsp", "7", "0"),
    ];
    for (prog, f, expected) in cases {
        let out = shcsp(&["lie", "--program", &program(prog), "--f", f]);
        assert_eq!(code(&out), 0, "{prog} {f}; stderr: {}", stderr(&out));
        assert_eq!(stdout(&out).trim(), expected, "{prog} with f = {f}");
    }
}

#[test]
fn lie_failure_modes() {
    // Non-differentiable observable: exit 1.
    let out = shcsp(&["lie", "--program", &program("aircraft_sym.shcsp"), "--f", "abs(y)"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("abs"), "stderr: {}", stderr(&out));
    // No SDE block in the program: exit 2.
    let out = shcsp(&["lie", "--program", &program("comm.shcsp"), "--f", "x"]);
    assert_eq!(code(&out), 2);
    // Unparseable observable: exit 2.
    let out = shcsp(&["lie", "--program", &program("contract1d.shcsp"), "--f", "s +"]);
    assert_eq!(code(&out), 2);
}
