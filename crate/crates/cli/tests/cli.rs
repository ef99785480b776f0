use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const GADGET: &str = r#"{"online_types":[
 {"id":"first/j","rate":0.3068528194400547,"edges":[{"offline":"j","weight":1.0}]},
 {"id":"first/j'","rate":0.3068528194400547,"edges":[{"offline":"j'","weight":1.0}]},
 {"id":"second","rate":1.3862943611198906,"edges":[{"offline":"j","weight":2.0},{"offline":"j'","weight":2.0}]}],
 "offline":["j","j'"]}"#;

const GADGET_X: &str = r#"{"x":[
 {"i":"first/j","j":"j","flow":0.3068528194400547},
 {"i":"first/j'","j":"j'","flow":0.3068528194400547},
 {"i":"second","j":"j","flow":0.6931471805599453},
 {"i":"second","j":"j'","flow":0.6931471805599453}]}"#;

fn stochmatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochmatch")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let d = TempDir::new().unwrap();
    let good = write(&d, "g.json", GADGET);
    let o = stochmatch(&["validate", s(&good)]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["violations"].as_array().unwrap().len(), 0);

    let bad = write(&d, "bad.json", r#"{"online_types":[{"id":"neg","rate":-1.0,"edges":[]}],"offline":[]}"#);
    let o = stochmatch(&["validate", s(&bad)]);
    assert_eq!(code(&o), 1);
    let v = &json(&o)["violations"][0];
    assert_eq!(v["kind"], "negative_rate");
    assert_eq!(v["subject"], "neg");

    assert_eq!(code(&stochmatch(&["validate", s(&d.path().join("missing.json"))])), 2);
    let garbled = write(&d, "garbled.json", "{not json");
    assert_eq!(code(&stochmatch(&["validate", s(&garbled)])), 2);
}

#[test]
fn validate_matching_reports_jaillet_lu_excess() {
    let d = TempDir::new().unwrap();
    let inst = write(&d, "i.json", r#"{"online_types":[{"id":"i","rate":1.0,"edges":[{"offline":"j","weight":1.0}]}],"offline":["j"]}"#);
    let m = write(&d, "m.json", r#"{"x":[{"i":"i","j":"j","flow":0.7}]}"#);
    let o = stochmatch(&["validate", s(&inst), "--matching", s(&m)]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["violations"][0]["kind"], "jaillet_lu");
}

#[test]
fn solve_lp_single_edge() {
    let d = TempDir::new().unwrap();
    let inst = write(&d, "i.json", r#"{"online_types":[{"id":"i","rate":1.0,"edges":[{"offline":"j","weight":1.0}]}],"offline":["j"]}"#);
    let out = d.path().join("x.json");
    let dump = d.path().join("lp.txt");
    let o = stochmatch(&["solve-lp", s(&inst), "-o", s(&out), "--dump-lp", s(&dump)]);
    assert_eq!(code(&o), 0);
    let want = (2.0 - std::f64::consts::LN_2) / 2.0;
    assert!((json(&o)["objective"].as_f64().unwrap() - want).abs() < 1e-7);
    let x: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!((x["x"][0]["flow"].as_f64().unwrap() - want).abs() < 1e-7);
    assert!(fs::read_to_string(&dump).unwrap().contains("z[i,j]"));

    let o = stochmatch(&["solve-lp", s(&inst), "--basic"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["x"][0]["flow"].as_f64().unwrap(), 1.0);
}

#[test]
fn preprocess_steps_compose() {
    let d = TempDir::new().unwrap();
    let inst = write(
        &d,
        "i.json",
        r#"{"online_types":[{"id":"a","rate":1.0,"edges":[{"offline":"j1","weight":1.0},{"offline":"j2","weight":3.0}]}],"offline":["j1","j2"]}"#,
    );
    let m = write(&d, "m.json", r#"{"x":[{"i":"a","j":"j1","flow":0.4},{"i":"a","j":"j2","flow":0.5}]}"#);
    let mut cur = (inst.clone(), m.clone());
    for step in ["pad-online", "pad-offline", "split"] {
        let out = d.path().join(step);
        let o = stochmatch(&["preprocess", s(&cur.0), s(&cur.1), "--step", step, "--out-dir", s(&out)]);
        assert_eq!(code(&o), 0, "{step}: {}", String::from_utf8_lossy(&o.stderr));
        cur = (out.join("instance.json"), out.join("matching.json"));
    }
    let all = d.path().join("all");
    assert_eq!(code(&stochmatch(&["preprocess", s(&inst), s(&m), "--out-dir", s(&all)])), 0);
    assert_eq!(fs::read(&cur.1).unwrap(), fs::read(all.join("matching.json")).unwrap());
    let map: Value = serde_json::from_str(&fs::read_to_string(all.join("split_map.json")).unwrap()).unwrap();
    let rate: f64 = map["a"].as_array().unwrap().iter().map(|c| c["rate"].as_f64().unwrap()).sum();
    assert!((rate - 1.0).abs() < 1e-12);

    // split before padding is refused
    let o = stochmatch(&["preprocess", s(&inst), s(&m), "--step", "split", "--out-dir", s(&d.path().join("x"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn simulate_single_replication_and_bad_flags() {
    let d = TempDir::new().unwrap();
    let inst = write(&d, "g.json", GADGET);
    let m = write(&d, "m.json", GADGET_X);
    let csv = d.path().join("s.csv");
    let o = stochmatch(&["simulate", s(&inst), s(&m), "--trials", "1", "--csv", s(&csv), "--with-opt"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["trials"], 1);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("edge_i,edge_j,class,x_ij,matched_count,ratio,stderr\n"));
    assert_eq!(text.lines().count(), 5);

    assert_eq!(code(&stochmatch(&["simulate", s(&inst), s(&m), "--trials", "0"])), 1);
    assert_eq!(code(&stochmatch(&["simulate", s(&inst), s(&m), "--t0", "0.8", "--t1", "0.2"])), 1);
    assert_eq!(code(&stochmatch(&["simulate", s(&inst), s(&m), "--policy", "greedy"])), 1);
}

#[test]
fn pipeline_is_deterministic() {
    let d = TempDir::new().unwrap();
    let inst = write(&d, "g.json", GADGET);
    let run = |name: &str, threads: &str| {
        let out = d.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_stochmatch"))
            .env("STOCHMATCH_THREADS", threads)
            .args(["pipeline", s(&inst), "--out-dir", s(&out), "--trials", "5000", "--seed", "9", "--with-opt"])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a", "0");
    let b = run("b", "1");
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 9);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn pipeline_single_replication() {
    let d = TempDir::new().unwrap();
    let inst = write(&d, "g.json", GADGET);
    let out = d.path().join("p");
    let o = stochmatch(&["pipeline", s(&inst), "--out-dir", s(&out), "--trials", "1"]);
    assert_eq!(code(&o), 0);
    let summary = json(&o);
    assert_eq!(summary["trials"], 1);
    assert!(summary["min_analytic_ratio"].as_f64().unwrap() >= 0.645);
    let cmp = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert!(cmp.starts_with("edge_i,edge_j,class,x_ij,y_j,analytic,multistage_ratio"));
}

#[test]
fn pipeline_rejects_invalid_instance() {
    let d = TempDir::new().unwrap();
    let bad = write(&d, "bad.json", r#"{"online_types":[{"id":"a","rate":1.0,"edges":[{"offline":"nowhere","weight":1.0}]}],"offline":[]}"#);
    assert_eq!(code(&stochmatch(&["pipeline", s(&bad), "--out-dir", s(&d.path().join("o"))])), 1);
}

#[test]
fn bounds_defaults_and_degenerate_times() {
    let o = stochmatch(&["bounds"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert!((v["min_ratio"].as_f64().unwrap() - 0.64504).abs() < 1e-5);
    assert_eq!(v["nonincreasing"], true);
    let a = &v["appendix"];
    assert!((a["lhs_min"].as_f64().unwrap() - 1.716).abs() < 1e-3);
    assert!((a["rhs_bound_low"].as_f64().unwrap() - 1.256).abs() < 1e-3);
    assert!((a["rhs_bound_high"].as_f64().unwrap() - 1.272).abs() < 1e-3);

    let o = stochmatch(&["bounds", "--t0", "0", "--t1", "1"]);
    let v = json(&o);
    assert!((v["min_ratio"].as_f64().unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-12);

    assert_eq!(code(&stochmatch(&["bounds", "--grid-points", "1"])), 1);
}

#[test]
fn bounds_search_and_outputs() {
    let d = TempDir::new().unwrap();
    let o = stochmatch(&["bounds", "--search", "--out-dir", s(d.path())]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["search"]["t0"].as_f64().unwrap(), 0.05);
    assert_eq!(v["search"]["t1"].as_f64().unwrap(), 0.75);
    let curve = fs::read_to_string(d.path().join("ratio_curve.csv")).unwrap();
    assert!(curve.starts_with("y,ratio_first,ratio_second\n"));
    assert_eq!(curve.lines().count(), 10_001);
    assert!(d.path().join("appendix.json").exists());
}

#[test]
fn search_params_degenerate_range() {
    let o = stochmatch(&["search-params", "--t0-range", "0", "0", "--t1-range", "1", "1"]);
    assert_eq!(code(&o), 0);
    assert!((json(&o)["ratio"].as_f64().unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    assert_eq!(code(&stochmatch(&["search-params", "--t0-range", "0.5", "0.6", "--t1-range", "0.1", "0.2"])), 1);
}

#[test]
fn opt_on_single_vertex() {
    // one vertex, unit weight: OPT = 1 iff at least one arrival, mean 1 - e^{-1}
    let d = TempDir::new().unwrap();
    let inst = write(&d, "i.json", r#"{"online_types":[{"id":"i","rate":1.0,"edges":[{"offline":"j","weight":1.0}]}],"offline":["j"]}"#);
    let o = stochmatch(&["opt", s(&inst), "--trials", "40000", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let mean = v["mean_offline_opt"].as_f64().unwrap();
    let p = 1.0 - (-1.0f64).exp();
    assert!((mean - p).abs() < 4.0 * (p * (1.0 - p) / 40000.0).sqrt(), "{mean}");
}
