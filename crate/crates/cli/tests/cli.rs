use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kinemat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinemat")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn schema() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json");
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn config_runs_are_byte_identical_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "suite = \"braid-oracles\"\nseed = 11\ndim = 2\nn_points = 2\ntheta = 3.141592653589793\ninstances = 10\n").unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for path in [&a, &b] {
        let out = kinemat(&["run", "--config", cfg.to_str().unwrap(), "--report", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let report = read_json(&a);
    let validator = schema();
    assert!(validator.is_valid(&report), "{:?}", validator.iter_errors(&report).map(|e| e.to_string()).collect::<Vec<_>>());
    let phase = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"].as_str().unwrap().starts_with("braid-oracles/exchange-phase/"))
        .unwrap();
    assert_eq!(phase["passed"], true);
    assert!((phase["observed"]["phase"][0].as_f64().unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn every_suite_report_matches_the_schema() {
    let validator = schema();
    let dir = tempfile::tempdir().unwrap();
    for suite in [
        "group-axioms",
        "flow-laws",
        "current-algebra",
        "intertwining",
        "cocycle",
        "braid-oracles",
        "classical-correspondence",
        "mc-unitarity",
        "stone-limit",
    ] {
        let path = dir.path().join(format!("{suite}.json"));
        let out = kinemat(&[
            "run", "--suite", suite, "--seed", "3", "--instances", "2", "--mc-samples", "4000", "--report",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{suite}: {}", String::from_utf8_lossy(&out.stderr));
        let report = read_json(&path);
        assert!(validator.is_valid(&report), "{suite} report violates the schema");
        assert_eq!(report["suite"], suite);
    }
}

#[test]
fn report_goes_to_stdout_without_a_path() {
    let out = kinemat(&["run", "--suite", "group-axioms", "--instances", "2", "--dim", "1"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["summary"]["all_passed"], true);
}

#[test]
fn flag_overrides_change_the_config_digest() {
    let run = |seed: &str| {
        let out = kinemat(&["run", "--suite", "stone-limit", "--instances", "2", "--seed", seed]);
        serde_json::from_slice::<Value>(&out.stdout).unwrap()
    };
    let (a, b) = (run("1"), run("2"));
    assert_ne!(a["config_digest"], b["config_digest"]);
    assert_ne!(a["checks"][0]["inputs_digest"], b["checks"][0]["inputs_digest"]);
}

#[test]
fn zero_flow_steps_pass_trivially() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "suite = \"group-axioms\"\nsteps = 0\ninstances = 5\n").unwrap();
    let out = kinemat(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn exit_statuses() {
    // failing checks
    let out = kinemat(&["run", "--suite", "stone-limit", "--instances", "2", "--tol", "1e-300"]);
    assert_eq!(code(&out), 1);
    let out = kinemat(&["run", "--suite", "flow-laws", "--instances", "2", "--tol", "one-parameter=1e-300"]);
    assert_eq!(code(&out), 1);

    // usage errors
    assert_eq!(code(&kinemat(&["run"])), 2);
    assert_eq!(code(&kinemat(&["run", "--suite", "no-such-suite"])), 2);
    assert_eq!(code(&kinemat(&["run", "--suite", "cocycle", "--dim", "3"])), 2);
    assert_eq!(code(&kinemat(&["run", "--suite", "flow-laws", "--tol", "jacobi=1e-3"])), 2);
    assert_eq!(code(&kinemat(&["run", "--suite", "flow-laws", "--hbar", "-1"])), 2);
    assert_eq!(code(&kinemat(&["run", "--config", "/nonexistent/run.toml"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "suite = \"cocycle\"\nunknown_key = 1\n").unwrap();
    assert_eq!(code(&kinemat(&["run", "--config", cfg.to_str().unwrap()])), 2);

    // numerical failure
    assert_eq!(code(&kinemat(&["demo", "exchange", "--points", "0,0;1e-12,0"])), 3);
}

#[test]
fn negative_control_flag_fails_the_jacobi_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "suite = \"current-algebra\"\nflip_jj_sign = true\ninstances = 4\n").unwrap();
    let out = kinemat(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    for c in report["checks"].as_array().unwrap() {
        let is_jacobi = c["name"].as_str().unwrap().starts_with("current-algebra/jacobi/");
        assert_eq!(c["passed"], !is_jacobi, "{}", c["name"]);
    }
}

fn demo(args: &[&str]) -> (String, Value) {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("demo.json");
    let mut full = vec!["demo", "exchange", "--report", report.to_str().unwrap()];
    full.extend_from_slice(args);
    let out = kinemat(&full);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (String::from_utf8(out.stdout).unwrap(), read_json(&report))
}

fn phase(report: &Value) -> (f64, f64) {
    (report["phase"][0].as_f64().unwrap(), report["phase"][1].as_f64().unwrap())
}

#[test]
fn demo_quarter_turn_gives_i() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("paths.csv");
    let (stdout, report) = demo(&["--theta", "1.5707963267948966", "--csv", csv.to_str().unwrap()]);
    assert!(stdout.contains("braid: s1"));
    let (re, im) = phase(&report);
    assert!(re.abs() < 1e-12 && (im - 1.0).abs() < 1e-12);
    assert_eq!(report["permutation"], serde_json::json!([1, 0]));

    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,strand,x,y"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2 * report["path_samples"].as_u64().unwrap() as usize);
    let last = &rows[rows.len() - 2..];
    // strand 0 ends where strand 1 started
    assert!((last[0][2] - 0.5).abs() < 1e-7 && last[0][3].abs() < 1e-7);
    assert!((last[1][2] + 0.5).abs() < 1e-7 && last[1][3].abs() < 1e-7);
}

#[test]
fn demo_double_exchange_gives_twice_the_angle() {
    let theta: f64 = 0.7;
    let (stdout, report) = demo(&["--theta", "0.7", "--exchanges", "2", "--n-points", "3"]);
    assert!(stdout.contains("braid: s1 s1"));
    let (re, im) = phase(&report);
    assert!((re - (2.0 * theta).cos()).abs() < 1e-12 && (im - (2.0 * theta).sin()).abs() < 1e-12);
    assert_eq!(report["permutation"], serde_json::json!([0, 1, 2]));
}

#[test]
fn demo_far_schedule_gives_empty_braid() {
    let dir = tempfile::tempdir().unwrap();
    let schedule = dir.path().join("far.json");
    fs::write(
        &schedule,
        r#"[{"field": {"dim": 2, "terms": [{"kind": "rotate", "center": [6.0, 6.0], "radius": 1.0, "rate": 1.0}]}, "r": 4.0}]"#,
    )
    .unwrap();
    let (stdout, report) = demo(&["--schedule", schedule.to_str().unwrap(), "--theta", "2.0"]);
    assert!(stdout.contains("braid: e"));
    assert_eq!(report["phase"], serde_json::json!([1.0, 0.0]));
}

#[test]
fn demo_with_permutation_rep_file() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("rep.json");
    fs::write(&rep, r#"{"n": 2, "d": 2, "generators": [[[[0, 0], [1, 0]], [[1, 0], [0, 0]]]]}"#).unwrap();
    let (_, report) = demo(&["--rep", rep.to_str().unwrap()]);
    assert_eq!(report["cocycle"], serde_json::json!([[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]));
    assert!(report.get("phase").is_none());

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"n": 2, "d": 1, "generators": [[[[2, 0]]]]}"#).unwrap();
    assert_eq!(code(&kinemat(&["demo", "exchange", "--rep", bad.to_str().unwrap()])), 2);
}
