use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_podsketch"));
    c.env_remove("PODSKETCH_SEED").env("RUST_LOG", "off");
    c
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_json(args: &[&str]) -> Value {
    let out = ok(bin().args(args).output().unwrap());
    serde_json::from_slice(&out.stdout).unwrap()
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

fn generate(dir: &Path, name: &str, rows: usize, cols: usize, spectrum: &str, noise: &str, seed: u64) -> PathBuf {
    let p = dir.join(name);
    ok(bin()
        .args(["generate", "--rows", &rows.to_string(), "--cols", &cols.to_string()])
        .args(["--spectrum", spectrum, "--noise", noise, "--seed", &seed.to_string(), "-o"])
        .arg(&p)
        .output()
        .unwrap());
    p
}

fn schema() -> jsonschema::Validator {
    let s: Value = serde_json::from_str(podsketch::report::RUN_REPORT_SCHEMA).unwrap();
    jsonschema::validator_for(&s).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn convert_writes_column_major_and_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("a.csv");
    std::fs::write(&csv, "1,2\n3,4\n").unwrap();
    let podm = dir.path().join("a.podm");
    let out = ok(bin().args(["convert", s(&csv), "-o", s(&podm)]).output().unwrap());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("m = 2") && text.contains("n = 2"), "{text}");
    let bytes = std::fs::read(&podm).unwrap();
    let values: Vec<f64> = bytes[24..].chunks(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    assert_eq!(values, vec![1.0, 3.0, 2.0, 4.0]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ragged = dir.path().join("r.csv");
    std::fs::write(&ragged, "1,2\n3\n").unwrap();
    let out = bin().args(["convert", s(&ragged), "-o", s(&dir.path().join("o"))]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let a = generate(dir.path(), "a.podm", 20, 30, "3,2,1", "0", 1);
    let out = bin().args(["run", "isma", s(&a), "--k", "25"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["run", "isma", s(&a), "--k", "2", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let zero = dir.path().join("z.csv");
    std::fs::write(&zero, "0,0\n0,0\n").unwrap();
    let out = bin().args(["run", "ltsvd", s(&zero), "--k", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(4));

    let mut bad = std::fs::read(&a).unwrap();
    bad.truncate(100);
    let trunc = dir.path().join("t.podm");
    std::fs::write(&trunc, bad).unwrap();
    let out = bin().args(["run", "incremental", s(&trunc), "--k", "2", "--blocks", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn gram_on_diagonal_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, "3,0,0\n0,2,0\n0,0,1\n").unwrap();
    let v = run_json(&["run", "gram", s(&csv), "--k", "3"]);
    assert_eq!(v["sigma"], serde_json::json!([3.0, 2.0, 1.0]));
}

#[test]
fn seeded_runs_are_reproducible_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.podm", 200, 1500, "10,9,8,7,6,5,4,3,2,1", "0.01", 3);
    let args = ["run", "isma", s(&a), "--k", "10", "--r", "30", "--strategy", "unf", "--tau", "0.99", "--seed", "7"];
    let first = run_json(&args);
    let second = run_json(&args);
    assert_eq!(without_timing(first.clone()), without_timing(second));
    let mut four = vec!["--threads", "4"];
    four.extend_from_slice(&args);
    let threaded = run_json(&four);
    assert_eq!(first["traces"], threaded["traces"]);
    assert_eq!(without_timing(first), without_timing(threaded));
}

#[test]
fn seed_env_is_a_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.podm", 50, 300, "5,4,3", "0.01", 4);
    let args = ["run", "isma", s(&a), "--k", "3", "--columns", "20"];
    let out = ok(bin().args(args).env("PODSKETCH_SEED", "11").output().unwrap());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 11);
    let mut explicit = args.to_vec();
    explicit.extend(["--seed", "11"]);
    assert_eq!(v["traces"], run_json(&explicit)["traces"]);
    let out = ok(bin().args(args).args(["--seed", "2"]).env("PODSKETCH_SEED", "11").output().unwrap());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 2);
}

#[test]
fn every_report_matches_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.podm", 60, 400, "6,5,4,1", "0.01", 5);
    let validator = schema();
    let cases: Vec<Vec<&str>> = vec![
        vec!["gram"],
        vec!["ltsvd"],
        vec!["ctsvd"],
        vec!["isma", "--finalize"],
        vec!["isma", "--rows", "--strategy", "ls", "--row-count", "40"],
        vec!["isma", "--strategy", "ort", "--criterion", "subspace"],
        vec!["incremental", "--blocks", "3"],
    ];
    for case in cases {
        let report = dir.path().join("r.json");
        let mut args = vec!["run", case[0], s(&a), "--k", "3", "--reference", s(&a), "-o", s(&report)];
        args.extend_from_slice(&case[1..]);
        ok(bin().args(&args).output().unwrap());
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{case:?}: {errors:?}");
        assert!(v["angles"]["mode"].as_array().unwrap().len() == 3);
    }
}

#[test]
fn save_factor_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.podm", 40, 200, "8,6,4,2", "0.001", 6);
    let f = dir.path().join("f.podf");
    ok(bin()
        .args(["run", "gram", s(&a), "--k", "3", "--save-factor", s(&f)])
        .output()
        .unwrap());
    let v = run_json(&["compare", s(&a), s(&f), "--k", "3"]);
    for t in v["angles"]["mode"].as_array().unwrap() {
        assert!(t.as_f64().unwrap() < 1e-6, "{v}");
    }
    // the saved gram factor carries k + 1 modes and right vectors
    assert!(v["wedin"]["measure"].as_f64().unwrap() < 1e-8, "{v}");
}

#[test]
fn subspace_criterion_never_samples_more_on_close_leading_pair() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.podm", 150, 2000, "10,9.99,5,2,1", "0.02", 8);
    for seed in 0..5 {
        let seed = seed.to_string();
        let common = ["run", "isma", s(&a), "--k", "2", "--seed", &seed, "--columns", "60"];
        let sampled = |criterion: &str| -> u64 {
            let mut args = common.to_vec();
            args.extend(["--criterion", criterion]);
            let v = run_json(&args);
            v["traces"].as_array().unwrap().iter().map(|t| t["columns_sampled"].as_u64().unwrap()).sum()
        };
        let (modes, subspace) = (sampled("modes"), sampled("subspace"));
        assert!(subspace <= modes, "seed {seed}: subspace {subspace} > modes {modes}");
    }
}
