use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn wfa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wfa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_NET: &[&str] = &[
    "--per-class", "6", "--points", "96", "--queries", "16", "--neighbors", "16", "--radius", "1.0", "--widths",
    "8,16",
];

#[test]
fn zero_per_class_is_a_usage_error_naming_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = wfa(&["gen-data", "--per-class", "0", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--per-class"));
}

#[test]
fn unknown_flag_and_bad_order_exit_2() {
    assert_eq!(code(&wfa(&["gradcheck", "--bogus"])), 2);
    assert_eq!(code(&wfa(&["invariance-report", "--order", "112"])), 2);
    assert_eq!(code(&wfa(&["train", "--widths", "2,8", "--out", "x"])), 2);
}

#[test]
fn gen_data_writes_files_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let args = ["gen-data", "--classes", "5", "--per-class", "20", "--seed", "7", "--out", p(&out)];
    let first = wfa(&args);
    assert_eq!(code(&first), 0);
    let manifest = json(&first);
    let files = manifest["result"]["files"].as_array().unwrap();
    assert_eq!(files.len(), 100);
    let plys = ["train", "test"]
        .iter()
        .map(|s| fs::read_dir(out.join(s)).unwrap().count())
        .sum::<usize>();
    assert_eq!(plys, 100);
    assert_eq!(manifest["config"]["seed"], 7);

    let snapshot: Vec<Vec<u8>> = files
        .iter()
        .map(|f| fs::read(out.join(f["file"].as_str().unwrap())).unwrap())
        .collect();
    let second = wfa(&args);
    assert_eq!(first.stdout, second.stdout);
    for (f, before) in files.iter().zip(&snapshot) {
        assert_eq!(&fs::read(out.join(f["file"].as_str().unwrap())).unwrap(), before);
    }
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = wfa(&["gen-data", "--per-class", "1", "--out", p(&blocker.join("sub"))]);
    assert_eq!(code(&o), 3);
    let o = wfa(&["invariance-report", "--input", p(&dir.path().join("missing.ply"))]);
    assert_eq!(code(&o), 3);
}

#[test]
fn invariance_report_with_zero_trials_is_valid_json() {
    let o = wfa(&["invariance-report", "--trials", "0"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["result"]["trials"].as_array().unwrap().len(), 0);
    assert_eq!(v["result"]["max_deviation"], 0.0);
}

#[test]
fn invariance_report_on_generated_cone_is_tight() {
    let o = wfa(&["invariance-report", "--trials", "20", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let r = &json(&o)["result"];
    assert!(r["clean_queries"].as_u64().unwrap() > 0);
    assert!(r["max_deviation"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn whole_sphere_neighborhoods_are_reported_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let g = wfa(&[
        "gen-data", "--classes", "1", "--per-class", "1", "--train-fraction", "1", "--noise", "0", "--out", p(&out),
    ]);
    assert_eq!(code(&g), 0);
    let sphere = out.join("train/0000_sphere.ply");
    let o = wfa(&[
        "invariance-report", "--input", p(&sphere), "--trials", "3", "--radius", "3", "--neighbors", "512",
        "--queries", "8", "--gap-tol", "0.2",
    ]);
    assert_eq!(code(&o), 0);
    let r = &json(&o)["result"];
    assert_eq!(r["degenerate"], 24);
    assert_eq!(r["clean_queries"], 0);
    assert_eq!(r["max_deviation"], 0.0);
}

#[test]
fn procrustes_check_passes_and_reports_constructed_gap() {
    let o = wfa(&["procrustes-check", "--instances", "10", "--samples", "5000", "--registration-samples", "200"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = &json(&o)["result"];
    assert_eq!(r["procrustes_optimality"], "pass");
    assert!(r["registration"]["constructed_max_gap"].as_f64().unwrap() <= 1e-9);
    assert_eq!(r["instances"].as_array().unwrap().len(), 10);
}

#[test]
fn config_file_supplies_defaults_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "trials = 4\nseed = 9\n[invariance-report]\nradius = 0.5\nsign_tol = 1e-7\n").unwrap();
    let o = wfa(&["--config", p(&cfg), "invariance-report", "--trials", "2"]);
    assert_eq!(code(&o), 0);
    let c = &json(&o)["config"];
    assert_eq!(c["trials"], 2);
    assert_eq!(c["seed"], 9);
    assert_eq!(c["radius"], 0.5);
    assert_eq!(c["sign_tol"], 1e-7);

    // keys another command lacks are skipped at top level, rejected in a table
    fs::write(&cfg, "per_class = 3\ntrials = 1\n").unwrap();
    let o = wfa(&["--config", p(&cfg), "invariance-report"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["config"]["trials"], 1);
    fs::write(&cfg, "[invariance-report]\nper_class = 3\n").unwrap();
    assert_eq!(code(&wfa(&["--config", p(&cfg), "invariance-report"])), 2);

    fs::write(&cfg, "trials = [").unwrap();
    assert_eq!(code(&wfa(&["--config", p(&cfg), "invariance-report"])), 2);
    assert_eq!(code(&wfa(&["--config", p(&dir.path().join("none.toml")), "gradcheck"])), 3);
}

#[test]
fn wfa_checkpoint_scores_the_same_with_and_without_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let mut args = vec!["train", "--epochs", "3", "--out", p(&run)];
    args.extend_from_slice(SMALL_NET);
    let t = wfa(&args);
    assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));
    let report: Value = serde_json::from_slice(&fs::read(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["result"]["report"]["epochs"].as_array().unwrap().len(), 3);

    let ckpt = run.join("model.ckpt");
    let score = |mode: &str| {
        let o = wfa(&["eval", "--checkpoint", p(&ckpt), "--per-class", "6", "--points", "96", "--mode", mode]);
        assert_eq!(code(&o), 0);
        json(&o)["result"]["accuracies"][0]["accuracy"].as_f64().unwrap()
    };
    assert_eq!(score("none"), score("arbitrary"));

    let o = wfa(&["eval", "--checkpoint", p(&ckpt), "--per-class", "6", "--points", "96", "--classes", "3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn gradcheck_passes_by_default_and_fails_with_exit_4() {
    let o = wfa(&["gradcheck", "--seed", "1"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("max rel err"));
    let r = &json(&o)["result"];
    assert!(r["max_rel_error"].as_f64().unwrap() <= 1e-3);

    let o = wfa(&["gradcheck", "--configs", "2", "--tolerance", "1e-300", "--worst-tolerance", "1e-300"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn ablation_ranks_all_six_orders() {
    let mut args = vec!["ablation", "--epochs", "1"];
    args.extend_from_slice(SMALL_NET);
    let o = wfa(&args);
    assert_eq!(code(&o), 0);
    let rows = json(&o)["result"]["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.iter().filter(|r| r["default"] == true).count(), 1);
    assert!(rows.iter().any(|r| r["order"] == "123"));
    let ranks: Vec<u64> = rows.iter().map(|r| r["rank"].as_u64().unwrap()).collect();
    assert_eq!(ranks, vec![1, 2, 3, 4, 5, 6]);
}
