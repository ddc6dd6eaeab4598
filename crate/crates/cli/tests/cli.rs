use std::io::Write as _;
use std::process::Command;

use eisrank::{curve_table, run_with, EXIT_FAIL, EXIT_OK, EXIT_USAGE};
use eisrank_core::density::{ScanReport, Side};
use eisrank_core::heegner::{CriterionReport, Verdict};
use eisrank_core::regression::Criterion;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("eisrank").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn heegner_19a1_twist() {
    let (code, out, _) = run(&["heegner", "--curve", "19a1", "--p", "3", "--psi", "41", "--K", "-8"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("verdict: non-torsion-rank-1"), "{out}");
    assert!(out.contains("rank E(Q) = 1, rank E_K(Q) = 0"), "{out}");
}

#[test]
fn heegner_json_round_trips() {
    let (code, out, _) =
        run(&["--format", "json", "heegner", "--curve", "19a1", "--p", "3", "--psi", "41", "--K", "-8"]);
    assert_eq!(code, EXIT_OK);
    let r: CriterionReport = serde_json::from_str(&out).unwrap();
    assert_eq!(r.verdict, Verdict::NonTorsionRank1);
    assert_eq!((r.split, r.nonsplit, r.additive), (1, 19, 1681));
    assert_eq!(r.class_numbers.get(&-328), Some(&4));
    assert_eq!(serde_json::to_value(&r).unwrap(), serde_json::from_str::<serde_json::Value>(&out).unwrap());
}

#[test]
fn inconclusive_and_refused_exit_one() {
    // 7 divides the twisted conductor and is inert in Q(sqrt(-2)).
    let (code, out, _) = run(&["heegner", "--curve", "19a1", "--p", "3", "--psi", "-7", "--K", "-8"]);
    assert_eq!(code, EXIT_FAIL);
    assert!(out.contains("inconclusive"), "{out}");
    let (code, out, _) = run(&["heegner", "--curve", "11a1", "--p", "3", "--K", "-7"]);
    assert_eq!(code, EXIT_FAIL);
    assert!(out.starts_with("refused"), "{out}");
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["bogus"][..],
        &["heegner", "--curve", "19a1", "--p", "3"],
        &["heegner", "--curve", "nope", "--p", "3", "--K", "-7"],
        &["heegner", "--curve", "19a1", "--p", "3", "--psi", "5", "--K", "-6"],
        &["classnum", "-3", "-12"],
        &["bernoulli", "--omega", "3"],
        &["descent", "--curve", "19a1", "--p", "3", "--type", "1,1,19"],
        &["density-bound", "--split", "3"],
        &["--format", "xml", "tau-check"],
    ] {
        let (code, _, err) = run(args);
        assert_eq!(code, EXIT_USAGE, "{args:?}");
        assert!(!err.is_empty(), "{args:?}");
    }
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("ramanujan-table"));
}

#[test]
fn ramanujan_table_values() {
    let (code, out, _) = run(&["ramanujan-table"]);
    assert_eq!(code, EXIT_OK);
    let last: Vec<&str> = out.lines().skip(1).map(|l| l.split_whitespace().last().unwrap()).collect();
    assert_eq!(last, ["583", "126", "583", "176"]);
    let (_, csv, _) = run(&["--format", "csv", "ramanujan-table"]);
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("psi,K,psi0,B_6,B_1,product\n"));
}

#[test]
fn bernoulli_and_classnum() {
    let (code, out, _) = run(&["bernoulli", "12"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "B_12 = -691/2730\n");
    let (_, out, _) = run(&["bernoulli", "12", "--mod", "691"]);
    assert!(out.contains("= 0 mod 691"));
    let (code, out, _) = run(&["--format", "csv", "classnum", "-23", "-328", "-123", "--analytic-check"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "disc,h,w,analytic\n-23,3,2,3\n-328,4,2,4\n-123,2,2,2\n");
}

#[test]
fn descent_and_tau() {
    let (code, out, _) = run(&["descent", "--curve", "19a1", "--p", "3", "--type", "1,1,19,1,1"]);
    assert_eq!(code, EXIT_OK, "{out}");
    // 19a1 is not congruent to an Eisenstein series mod 5.
    let (code, _, _) = run(&["descent", "--curve", "19a1", "--p", "5", "--type", "1,1,19,1,1"]);
    assert_eq!(code, EXIT_FAIL);
    let (code, out, _) = run(&["--prec", "60", "tau-check"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("1 <= n <= 60"));
}

#[test]
fn cuspform_and_eisenstein() {
    let (_, out, _) = run(&["--prec", "3", "--format", "csv", "cuspform", "-k", "12"]);
    assert_eq!(out, "n,a_n\n0,0\n1,1\n2,-24\n3,252\n");
    let (_, out, _) = run(&["--prec", "2", "--format", "csv", "eisenstein", "-k", "12", "--mod", "691"]);
    assert_eq!(out, "n,a_n\n0,0\n1,1\n2,667\n");
}

#[test]
fn density_bound_curve_matches_split() {
    let (_, a, _) = run(&["--format", "json", "density-bound", "--curve", "19a1"]);
    let (_, b, _) = run(&["--format", "json", "density-bound", "--split", "19"]);
    assert_eq!(a, b);
    let (code, out, _) = run(&["density-bound", "--split", "19", "--side", "imaginary", "--family"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("residue family: M ="));
}

#[test]
fn twist_scan_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.json");
    let p = path.to_str().unwrap();
    let (code, _, _) = run(&["twist-scan", "--curve", "19a1", "--X", "300", "--out", p]);
    assert_eq!(code, EXIT_OK);
    let r: ScanReport = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r.branch, Side::RealL);
    assert_eq!(r.x, 300);
    assert!(r.verified.iter().all(|d| *d > 0 && *d <= 300));
    let (_, serial, _) = run(&["--format", "json", "twist-scan", "--curve", "19a1", "--X", "300", "--serial"]);
    let s: ScanReport = serde_json::from_str(&serial).unwrap();
    assert_eq!(r, s);
}

#[test]
fn paper_examples_is_deterministic() {
    let (code, a, _) = run(&["paper-examples"]);
    let (_, b, _) = run(&["paper-examples"]);
    assert_eq!(a, b);
    let summary = a.lines().last().unwrap();
    assert!(summary.ends_with("criteria pass"), "{summary}");
    let all_pass = a.lines().filter(|l| l.starts_with("FAIL")).count() == 0;
    assert_eq!(code, if all_pass { EXIT_OK } else { EXIT_FAIL });
    let (_, json, _) = run(&["--format", "json", "paper-examples"]);
    let parsed: Vec<Criterion> = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed.len(), 9);
    assert_eq!(parsed.iter().map(|c| c.id).collect::<Vec<_>>(), (1..=9).collect::<Vec<_>>());
}

fn data_file(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn data_file_merges_and_overrides() {
    let f = data_file("# extra\n43a1,0,1,1,0,0,43\n11a1,0,-1,1,0,0,11\n");
    let table = curve_table(Some(&f.path().to_path_buf())).unwrap();
    assert!(table.iter().any(|c| c.label == "43a1"));
    assert!(table.iter().any(|c| c.label == "19a1"));
    let e = table.iter().find(|c| c.label == "11a1").unwrap();
    assert_eq!(e.a_invariants()[3], 0.into());
    assert_eq!(table.iter().filter(|c| c.label == "11a1").count(), 1);

    let empty = data_file("");
    assert_eq!(curve_table(Some(&empty.path().to_path_buf())).unwrap().len(), table.len() - 1);
}

#[test]
fn data_file_errors_name_the_line() {
    let f = data_file("43a1,0,1,1,0,0,43\n43b1,0,1,x,0,0,43\n");
    let p = f.path().to_str().unwrap();
    let (code, _, err) = run(&["--data", p, "density-bound", "--curve", "43a1"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("line 2"), "{err}");
    let (code, _, err) = run(&["--data", "/nonexistent/curves.txt", "density-bound", "--curve", "19a1"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("/nonexistent/curves.txt"), "{err}");
}

#[test]
fn binary_reads_data_from_env() {
    let f = data_file("43a1,0,1,1,0,0,43\n");
    let out = Command::new(env!("CARGO_BIN_EXE_eisrank"))
        .args(["density-bound", "--curve", "43a1"])
        .env(eisrank::DATA_ENV, f.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let out = Command::new(env!("CARGO_BIN_EXE_eisrank"))
        .args(["density-bound", "--curve", "43a1"])
        .env_remove(eisrank::DATA_ENV)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
}
