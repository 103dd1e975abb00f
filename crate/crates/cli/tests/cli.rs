use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irspec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn spectra_one_voter() {
    let r = report(&["spectra", "--m", "3"]);
    let clusters = r["reduced"]["clusters"].as_array().unwrap();
    let got: Vec<(f64, u64)> = clusters
        .iter()
        .map(|c| (f(&c["value"]), c["multiplicity"].as_u64().unwrap()))
        .collect();
    let want = [(0.0, 1), (1.0 / 6.0, 2), (1.0 / 3.0, 1)];
    assert_eq!(got.len(), 3);
    for ((v, k), (wv, wk)) in got.iter().zip(want) {
        assert!((v - wv).abs() < 1e-9 && *k == wk, "{got:?}");
    }
}

#[test]
fn spectra_two_voters_gap_in_bracket() {
    let r = report(&["spectra", "--m", "3", "--n", "2"]);
    let gap = f(&r["gap"]["gap"]);
    assert!(r["gap"]["exhaustive"].as_bool().unwrap());
    assert!((1.0 / 12.0 - 1e-9..=1.0 / 6.0 + 1e-9).contains(&gap), "{gap}");
}

#[test]
fn spectra_refuses_two_alternatives() {
    let out = run(&["spectra", "--m", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("m ≥ 3"));
}

#[test]
fn census_reports() {
    let swf = report(&["census", "--m", "3"]);
    assert_eq!(swf["report"]["members"].as_array().unwrap().len(), 12);
    assert_eq!(swf["report"]["other"], 0);
    assert_eq!(swf["report"]["functions_examined"], 46656);
    let scf = report(&["census", "--m", "3", "--partition", "1|2,3"]);
    assert_eq!(scf["report"]["members"].as_array().unwrap().len(), 6);
    assert_eq!(scf["report"]["other"], 0);
}

#[test]
fn census_refuses_large_spaces() {
    let out = run(&["census", "--m", "4"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("24^24"));
}

#[test]
fn analyze_dictator_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "d.json",
        r#"{"m": 3, "n": 2, "partition": "1|2|3", "type": "dictator", "voter": 2, "sigma": "132"}"#,
    );
    let r = report(&["analyze", "--input", &input]);
    assert_eq!(r["ir"]["profile_distance_ir"]["exact"], "0");
    assert_eq!(r["ir"]["indicator_ir"]["exact"], "0");
    assert!(f(&r["robustness"]["kernel_distance2"]) < 1e-12);
    let best = &r["robustness"]["best"]["rounded"];
    assert_eq!(best["kind"], "dictator");
    assert_eq!(best["voter"], 2);
    assert_eq!(best["sigma"], "132");
}

#[test]
fn analyze_table_file() {
    let dir = tempfile::tempdir().unwrap();
    let entries: Vec<String> = ["123", "132", "213", "231", "312", "321"]
        .iter()
        .map(|w| format!(r#"{{"profile": ["{w}"], "output": "{w}"}}"#))
        .collect();
    let text = format!(
        r#"{{"m": 3, "n": 1, "partition": "1|2|3", "type": "table", "entries": [{}]}}"#,
        entries.join(",")
    );
    let input = write(dir.path(), "t.json", &text);
    let r = report(&["analyze", "--input", &input]);
    assert_eq!(r["ir"]["profile_distance_ir"]["exact"], "0");
    assert_eq!(r["manipulation"]["total"]["exact"], "0");

    let partial = write(dir.path(), "p.json", &text.replace(r#"{"profile": ["321"], "output": "321"}"#, "").replace(",]", "]"));
    assert_eq!(run(&["analyze", "--input", &partial]).status.code(), Some(2));
    let broken = write(dir.path(), "b.json", "{");
    assert_eq!(run(&["analyze", "--input", &broken]).status.code(), Some(2));
}

#[test]
fn analyze_plurality_winner() {
    let r = report(&["analyze", "--m", "3", "--n", "2", "--partition", "1|2,3", "--rule", "plurality"]);
    assert!(f(&r["ir"]["profile_distance_ir"]["value"]) > 0.0);
    assert_eq!(r["manipulation"]["bound_holds"], true);
    assert_eq!(r["manipulation"]["c"]["exact"], "3/2");
}

#[test]
fn analyze_recovers_corrupted_dictator() {
    for seed in ["1", "2", "3"] {
        let r = report(&[
            "analyze", "--m", "3", "--n", "2", "--rule", "dictator:i=2,sigma=231", "--corrupt", "2",
            "--seed", seed,
        ]);
        assert!(f(&r["ir"]["profile_distance_ir"]["value"]) > 0.0);
        let best = &r["robustness"]["best"]["rounded"];
        assert_eq!(best["voter"], 2, "seed {seed}");
        assert_eq!(best["sigma"], "231", "seed {seed}");
        assert_eq!(r["robustness"]["kernel_bound_holds"], true);
    }
}

#[test]
fn analyze_rejects_bad_rules() {
    assert_eq!(run(&["analyze", "--m", "3", "--rule", "veto"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "--m", "3", "--rule", "dictator:i=1"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "--m", "3"]).status.code(), Some(2));
}

#[test]
fn moments_report() {
    let r = report(&["moments", "--range", "4-7", "--samples", "100", "--seed", "3"]);
    assert_eq!(r["determinant"]["all_match"], true);
    assert_eq!(r["audit"]["derived_matches_brute_force"], true);
    assert_eq!(r["audit"]["derived_reproduces_fourth_moment"], true);
    for s in r["audit"]["sources"].as_array().unwrap() {
        assert_eq!(s["reproduces_fourth_moment"], false);
    }
    assert_eq!(r["hypercontractivity"]["rows"].as_array().unwrap().len(), 4);
    assert!(r["hypercontractivity"]["empirical_m0"].is_u64());

    let fixed = report(&["moments", "--range", "5-5", "--samples", "40", "--sigma-hyper", "1"]);
    assert!(fixed["hypercontractivity"]["rows"][0]["violations"].as_u64().unwrap() > 0);
    assert!(fixed["hypercontractivity"]["empirical_m0"].is_null());

    assert_eq!(run(&["moments", "--sigma-hyper", "2"]).status.code(), Some(2));
    assert_eq!(run(&["moments", "--range", "3-5"]).status.code(), Some(2));
}

#[test]
fn reports_are_deterministic_across_pools() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for threads in ["1", "3"] {
        let path = dir.path().join(format!("r{threads}.json"));
        let out = run(&[
            "--threads", threads, "--out", path.to_str().unwrap(), "analyze", "--m", "3", "--n", "2",
            "--rule", "random", "--seed", "9",
        ]);
        assert!(out.status.success());
        assert!(String::from_utf8_lossy(&out.stdout).contains("IR = "));
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    let a = run(&["moments", "--range", "4-5", "--samples", "30", "--threads", "1"]);
    let b = run(&["moments", "--range", "4-5", "--samples", "30", "--threads", "2"]);
    assert_eq!(a.stdout, b.stdout);
}
