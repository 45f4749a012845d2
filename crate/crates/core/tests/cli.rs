use serde_json::Value;
use std::path::PathBuf;
use std::process::Command;

fn case(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases").join(name).display().to_string()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("gridstate").chain(args.iter().copied());
    let code = gridstate::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn report(args: &[&str]) -> (i32, Value) {
    let (code, out, _) = run(args);
    (code, serde_json::from_str(&out).unwrap())
}

const PATH3: &str = "function mpc = path3
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0  0 0 0 1 1 0 0 1 1.1 0.9;
  2 1 50 10 0 0 1 1 0 0 1 1.1 0.9;
  3 1 40 5 0 0 1 1 0 0 1 1.1 0.9;
];
mpc.gen = [
  1 90 0 100 -100 1 100 1 200 0;
];
mpc.branch = [
  1 2 0.01 0.1 0 0 0 0 0 0 1 -360 360;
  2 3 0.01 0.1 0 0 0 0 0 0 1 -360 360;
];
";

#[test]
fn pmu_place_on_three_bus_path_picks_the_middle() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("path3.m");
    std::fs::write(&p, PATH3).unwrap();
    let (code, v) = report(&["pmu-place", p.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["buses"], serde_json::json!([2]));
    assert_eq!(v["command"], "pmu-place");
}

#[test]
fn dc_estimation_report_has_angles_and_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    let (code, _) = report(&["measure", &case("case14.m"), "--model", "dc", "--seed", "3", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (code, v) = report(&["se", "--model", "dc", "--method", "wls", &case("case14.m"), csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    let r = &v["results"];
    assert_eq!(r["angle"].as_array().unwrap().len(), 14);
    assert!(!r["residuals"].as_array().unwrap().is_empty());
    assert_eq!(v["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(v["inputs_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let args = ["measure", &case("case14.m"), "--seed", "7"];
    let (a, b) = (run(&args).1, run(&args).1);
    assert_eq!(a, b);
    let other = run(&["measure", &case("case14.m"), "--seed", "8"]).1;
    assert_ne!(a, other);
}

#[test]
fn every_subcommand_succeeds_on_case14() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    let c14 = case("case14.m");
    assert_eq!(run(&["measure", &c14, "--inclusion", "1", "--pmu", "2,6,7,9", "--csv", csv.to_str().unwrap()]).0, 0);
    let m = csv.to_str().unwrap();
    let script = dir.path().join("s.json");
    std::fs::write(
        &script,
        r#"[{"analyses": [{"type": "dc_pf"}, {"type": "estimate", "model": "ac"}]},
            {"changes": [{"type": "scale_loads", "factor": 1.05}], "analyses": [{"type": "dc_pf"}]}]"#,
    )
    .unwrap();
    let snap = dir.path().join("c.json");
    for args in [
        vec!["pf", &c14],
        vec!["pf", &c14, "--method", "fdxb", "--flat"],
        vec!["pf", &c14, "--method", "gs"],
        vec!["dcpf", &c14],
        vec!["opf-dc", &c14, "--segments", "8"],
        vec!["observe", &c14, m],
        vec!["pmu-place", &c14, "--legacy", m],
        vec!["se", &c14, m],
        vec!["se", &c14, m, "--method", "orthogonal", "--coordinates", "polar"],
        vec!["se", &c14, m, "--model", "pmu", "--neglect-covariance", "false"],
        vec!["baddata", &c14, m, "--force"],
        vec!["qss", &c14, "--script", script.to_str().unwrap(), "--measurements", m],
        vec!["convert", &c14, "--to", snap.to_str().unwrap(), "--measurements", m],
        vec!["se", snap.to_str().unwrap(), snap.to_str().unwrap(), "--model", "dc"],
    ] {
        let (code, v) = report(&args);
        assert_eq!(code, 0, "{args:?}: {v}");
        assert_eq!(v["status"], "ok");
        assert_eq!(v["schema_version"], 1);
    }
}

#[test]
fn failures_are_structured() {
    // Polynomial costs without --segments: input error.
    let (code, v) = report(&["opf-dc", &case("case14.m")]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "input");
    // Too few iterations: analysis failure.
    let (code, v) = report(&["pf", &case("case14.m"), "--flat", "--max-iterations", "1"]);
    assert_eq!(code, 1);
    assert_eq!(v["error"]["kind"], "analysis");
    assert!(v.get("results").is_none());
    // Missing file.
    let (code, v) = report(&["dcpf", "/nonexistent/case.m"]);
    assert_eq!(code, 2);
    assert_eq!(v["status"], "error");
}

#[test]
fn usage_errors_exit_2() {
    let (code, out, err) = run(&["pf", "--bogus", &case("case14.m")]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("Usage"));
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn binary_exit_codes_and_output_file() {
    let bin = env!("CARGO_BIN_EXE_gridstate");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let s = Command::new(bin)
        .args(["dcpf", &case("case9.m"), "--table", "-o", out.to_str().unwrap()])
        .env("GRIDSTATE_LOG", "debug")
        .output()
        .unwrap();
    assert_eq!(s.status.code(), Some(0));
    assert!(s.stdout.is_empty());
    assert!(String::from_utf8_lossy(&s.stderr).contains("angle deg"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["results"]["angle"].as_array().unwrap().len(), 9);
    let s = Command::new(bin).args(["se", "--nope"]).output().unwrap();
    assert_eq!(s.status.code(), Some(2));
}
