use std::path::PathBuf;
use std::process::{Command, Output};

use dex_cli::file::{parse_instance, FieldOverride, InstanceFile};
use dex_core::TerminalSet;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn dex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dex")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn oracle_prints_exact_optimum() {
    let o = dex(&["oracle", fixture("example1.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "optimum 2"), "{text}");
    assert!(text.starts_with("# 31 cut constraints"));

    let o = dex(&["oracle", "--json", fixture("example2.json").to_str().unwrap()]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["objective"], "9/4");
    assert_eq!(v["constraints"].as_array().unwrap().len(), 55);
}

#[test]
fn solve_writes_a_record_that_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sol.json");
    let trace = dir.path().join("trace.jsonl");
    let ex2 = fixture("example2.json");
    let o = dex(&[
        "solve",
        ex2.to_str().unwrap(),
        "--field-char",
        "3",
        "-o",
        out.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rec["format_version"], 1);
    assert!((rec["objective_approx"].as_f64().unwrap() - 2.25).abs() <= 1e-3);
    assert_eq!(rec["rates"].as_array().unwrap().len(), 6);
    let lines = std::fs::read_to_string(&trace).unwrap();
    let last: Value = serde_json::from_str(lines.lines().last().unwrap()).unwrap();
    assert_eq!(last["iteration"], rec["iterations"]);
    assert!(last["gap"].as_f64().unwrap() <= 1e-3);

    let v = dex(&["verify", ex2.to_str().unwrap(), "--solution", out.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));
    assert!(stdout(&v).starts_with("feasible"));
}

#[test]
fn verify_lists_violated_cuts() {
    let o = dex(&["verify", fixture("example1.json").to_str().unwrap(), "--rates", "0,0,0,0,0,0"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("violated {1,2,3,4,5}: need 2, have 0"), "{text}");
    let ok = dex(&["verify", fixture("example1.json").to_str().unwrap(), "--rates", "0,0,0,1,0,1"]);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn non_convergence_exits_one() {
    let o = dex(&["solve", fixture("example2.json").to_str().unwrap(), "--max-iters", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rec["converged"], false);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(dex(&["solve"]).status.code(), Some(2));
    assert_eq!(dex(&["frobnicate"]).status.code(), Some(2));
    let ex1 = fixture("example1.json");
    let e = ex1.to_str().unwrap();
    assert_eq!(dex(&["solve", e, "--theta", "0,1,1"]).status.code(), Some(2));
    assert_eq!(dex(&["solve", e, "--theta", "pow:1.5"]).status.code(), Some(2));
    assert_eq!(dex(&["solve", e, "--tie-break", "9"]).status.code(), Some(2));
    assert_eq!(dex(&["solve", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(dex(&["verify", e, "--rates", "1,x"]).status.code(), Some(2));
}

#[test]
fn tie_break_flag_selects_the_vertex() {
    let o = dex(&["solve", fixture("example1.json").to_str().unwrap(), "--tie-break", "3,4,5,1,2"]);
    let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
    let rates: Vec<&str> = rec["rates"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(rates, ["0", "0", "0", "1", "0", "1"]);
    assert_eq!(rec["gap"], "0");
}

#[test]
fn codegen_simulate_graph_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = dir.path().join("fig1.scheme");
    let fig1 = fixture("fig1.json");
    let f = fig1.to_str().unwrap();
    let o = dex(&["codegen", f, "--seed", "3", "-o", scheme.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&scheme).unwrap();
    assert!(text.starts_with("format_version 1\n"));
    assert!(text.contains("chunks 1\n"));
    let s = dex(&["simulate", f, "--scheme", scheme.to_str().unwrap(), "--seeds", "25"]);
    assert_eq!(s.status.code(), Some(0));
    assert_eq!(stdout(&s), "success 25/25\n");

    let g = dex(&["graph", f, "--rates", "0,1,1"]);
    assert_eq!(g.status.code(), Some(0));
    assert!(stdout(&g).starts_with("digraph"));
    assert!(String::from_utf8_lossy(&g.stderr).contains("receiver 0: min-cut 4"));
}

#[test]
fn simulate_reports_a_deficient_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = dir.path().join("weak.scheme");
    // The helper sends only w0 instead of w0 + w2.
    std::fs::write(
        &scheme,
        "format_version 1\nfield 2 1\nextension_degree 1\nchunks 1\npackets 4\nusers 0 1\n\
         terminal 0 rate 0 width 2\nterminal 1 rate 1 width 3\n  0 0 1\nterminal 2 rate 1 width 2\n  1 0\n",
    )
    .unwrap();
    let s = dex(&["simulate", fixture("fig1.json").to_str().unwrap(), "--scheme", scheme.to_str().unwrap(), "--seeds", "5"]);
    assert_eq!(s.status.code(), Some(1));
    assert_eq!(stdout(&s), "success 0/5\n");
}

#[test]
fn infeasible_transmitters_exit_one() {
    let text = std::fs::read_to_string(fixture("example1.json")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["transmitters"] = serde_json::json!([3]);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, v.to_string()).unwrap();
    assert_eq!(dex(&["oracle", p.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn fixtures_parse_as_described() {
    let ex1 = parse_instance(&fixture("example1.json"), FieldOverride::default()).unwrap();
    assert_eq!(ex1.terminal_count(), 6);
    assert_eq!(ex1.users(), TerminalSet::singleton(0));
    let fig1 = parse_instance(&fixture("fig1.json"), FieldOverride::default()).unwrap();
    let src = fig1.model().as_linear().unwrap();
    // Owned packets become identity rows.
    assert_eq!(src.matrices()[2].row_vecs(), vec![vec![1, 0, 0, 0], vec![0, 0, 1, 0]]);

    let text = std::fs::read_to_string(fixture("example1.json")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["entropy_table"] = serde_json::json!([0, 1]);
    let both = InstanceFile::from_json(&v.to_string()).unwrap();
    assert!(both.to_instance(FieldOverride::default()).is_err());
}

#[test]
fn instance_files_round_trip() {
    for name in ["example1.json", "example2.json", "fig1.json"] {
        let path = fixture(name);
        let inst = parse_instance(&path, FieldOverride::default()).unwrap();
        let names = dex_cli::instance_names(&path).unwrap();
        let text = dex_cli::instance_json(&inst, &names);
        let back = InstanceFile::from_json(&text).unwrap().to_instance(FieldOverride::default()).unwrap();
        assert_eq!(back, inst);
        for s in inst.model().all().subsets() {
            assert_eq!(back.model().joint_entropy(s), inst.model().joint_entropy(s));
        }
    }
}
