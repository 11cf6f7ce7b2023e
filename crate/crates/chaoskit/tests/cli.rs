use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const PAIR: &str = r#"{"model":"classical","p":2,"m":2,"mode":"exact","coeffs":["0","1","1","0"]}"#;

fn chaoskit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaoskit"))
        .args(args)
        .env_remove("SOURCE_DATE_EPOCH")
        .env_remove("CHAOSKIT_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = chaoskit(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    chaoskit(args).status.code().unwrap()
}

fn result(text: &str) -> Value {
    serde_json::from_str::<Value>(text).unwrap()["result"].clone()
}

fn rows(csv_text: &str) -> Vec<Vec<String>> {
    let body: String = csv_text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn moment_examples() {
    let dir = TempDir::new().unwrap();
    let pair = write(&dir, "pair.json", PAIR);
    let v = |args: &[&str]| result(&ok(args))["value"].clone();
    assert_eq!(v(&["moment", "--family", "constant_hermite", "--p", "2", "--model", "free", "--k", "4"]), "3");
    assert_eq!(v(&["moment", &pair, "--model", "classical", "--k", "4"]), "9");
    assert_eq!(v(&["moment", "--family", "constant_hermite", "--p", "1", "--model", "classical", "--k", "8"]), "105");
    for path in ["expansion", "oracle"] {
        assert_eq!(v(&["moment", &pair, "--k", "4", "--path", path]), "9");
    }
    assert_eq!(v(&["moment", &pair, "--k", "4", "--mode", "float"]), 9.0);
    assert_eq!(v(&["moment", &pair, "--k", "4", "--eval", "network"]), "9");
}

#[test]
fn fourth_check_examples() {
    let dir = TempDir::new().unwrap();
    let pair = write(&dir, "pair.json", PAIR);
    let r = result(&ok(&["fourth-check", &pair]));
    assert_eq!(r["gap"], "6");
    assert_eq!(r["profile"], serde_json::json!(["1/8"]));
    assert_eq!(r["residue"], "0");
    assert_eq!(r["beauty"]["lhs"], r["beauty"]["rhs"]);

    let r = result(&ok(&["fourth-check", "--family", "constant_hermite", "--p", "1"]));
    assert_eq!(r["gap"], "0");

    let r = result(&ok(&["fourth-check", &pair, "--model", "free", "--normalize"]));
    assert_eq!(r["gap"], "1/2");
    assert_eq!(r["residue"], "0");
}

#[test]
fn index_set_examples() {
    let count = |p: &str, k: &str, class: &str| rows(&ok(&["index-sets", "--p", p, "--k", k, "--class", class])).len();
    assert_eq!(count("2", "4", "c"), 2);
    assert_eq!(count("3", "6", "c"), 5);
    // odd total order kp has no complete contraction
    assert_eq!(count("3", "3", "b"), 0);
    // for p = 2 the three-fold product still has one: (1, 2)
    let b3 = rows(&ok(&["index-sets", "--p", "2", "--k", "3", "--class", "b"]));
    assert_eq!(b3, vec![vec!["(1,2)", "E", "0", "8", "", "", ""]]);

    let json: Value = serde_json::from_str(&ok(&["--json", "index-sets", "--p", "2", "--k", "4", "--class", "c"])).unwrap();
    assert_eq!(json["result"].as_array().unwrap().len(), 2);
    assert_eq!(json["result"][0]["dyck"], "true");
}

#[test]
fn converge_columns() {
    let table = |model: &str| {
        rows(&ok(&["converge", "--family", "pair_clt", "--n", "1,2,4,8", "--model", model, "--kmax", "6"]))
    };
    let free = table("free");
    let k4: Vec<&Vec<String>> = free.iter().filter(|r| r[1] == "4").collect();
    assert_eq!(k4.iter().map(|r| r[2].as_str()).collect::<Vec<_>>(), ["5/2", "9/4", "17/8", "33/16"]);
    for r in &free {
        let want = match r[1].as_str() {
            "2" => "1",
            "4" => "2",
            "6" => "5",
            _ => "0",
        };
        assert_eq!(r[5], want, "C sum at n={} k={}", r[0], r[1]);
    }
    let classical = table("classical");
    let k4: Vec<&str> = classical.iter().filter(|r| r[1] == "4").map(|r| r[2].as_str()).collect();
    assert_eq!(k4, ["9", "6", "9/2", "15/4"]);

    let terms = rows(&ok(&["converge", "--n", "1,2", "--model", "classical", "--kmax", "4", "--terms"]));
    assert!(terms.iter().any(|r| r[2] == "(2,0,2)" && r[6] == "1/4"));
}

#[test]
fn simulate_examples() {
    let dir = TempDir::new().unwrap();
    let pair = write(&dir, "pair.json", PAIR);
    let r = result(&ok(&["simulate", &pair, "--k", "4", "--samples", "1000000", "--seed", "3"]));
    assert_eq!(r["target"], "9");
    assert!(r["z_score"].as_f64().unwrap().abs() <= 4.0, "{r}");

    let r = result(&ok(&[
        "simulate", &pair, "--model", "free", "--normalize", "--k", "4", "--samples", "40", "--dim", "200",
    ]));
    assert_eq!(r["target"], "5/2");
    assert!((r["estimate"].as_f64().unwrap() - 2.5).abs() < 0.1, "{r}");

    assert_eq!(code(&["simulate", &pair, "--k", "4", "--seed", "abc"]), 2);
    let diagonal = ["simulate", "--family", "constant_hermite", "--p", "2", "--model", "free", "--k", "4"];
    assert_eq!(code(&diagonal), 4);
}

#[test]
fn simulation_does_not_depend_on_thread_count() {
    let args = ["simulate", "--family", "pair_clt", "--n", "3", "--k", "4", "--samples", "20000", "--seed", "9"];
    let estimate = |threads: &str| {
        let mut a = vec!["--threads", threads];
        a.extend_from_slice(&args);
        result(&ok(&a))["estimate"].clone()
    };
    assert_eq!(estimate("1"), estimate("3"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json").display().to_string();
    assert_eq!(code(&["moment", &missing, "--k", "4"]), 2);
    let bad = write(&dir, "bad.json", r#"{"model":"classical","p":2,"m":2,"mode":"exact","coeffs":["0","1"]}"#);
    assert_eq!(code(&["moment", &bad, "--k", "4"]), 2);
    assert_eq!(code(&["moment", "--family", "pair_clt", "--k", "4"]), 2);
    assert_eq!(code(&["moment", "--k", "4", "--unknown-flag"]), 2);
    assert_eq!(code(&["--threads", "many", "verify"]), 2);

    let big = ["--budget", "100", "moment", "--family", "pair_clt", "--n", "8", "--k", "4", "--eval", "prefix-tree"];
    assert_eq!(code(&big), 3);
    let oracle = ["moment", "--family", "pair_clt", "--n", "8", "--k", "4", "--path", "oracle"];
    assert_eq!(code(&oracle), 3);

    assert_eq!(code(&["fourth-check", "--family", "constant_hermite", "--p", "2"]), 4);
    let asym = write(&dir, "asym.json", r#"{"model":"free","p":2,"m":2,"mode":"exact","coeffs":["0","1","0","0"]}"#);
    assert_eq!(code(&["moment", &asym, "--k", "4"]), 4);
}

#[test]
fn verify_suite_and_fixtures() {
    let out = ok(&["verify"]);
    let table = rows(&out);
    assert!(table.len() >= 10);
    assert!(table.iter().all(|r| r[1] == "pass"), "{out}");

    let dir = TempDir::new().unwrap();
    let good = write(
        &dir,
        "pair.json",
        r#"{"model":"classical","p":2,"m":2,"mode":"exact","coeffs":["0","1","1","0"],
            "expect":{"moments":{"4":"9","6":"225"},"symmetric":true}}"#,
    );
    assert_eq!(code(&["verify", "--fixture", &good]), 0);
    let corrupt = write(
        &dir,
        "corrupt.json",
        r#"{"model":"classical","p":2,"m":2,"mode":"exact","coeffs":["0","1","3","0"],
            "expect":{"moments":{"4":"9"},"symmetric":true}}"#,
    );
    let out = chaoskit(&["verify", "--fixture", &corrupt]);
    assert_eq!(out.status.code(), Some(5));
    let failed: Vec<String> = rows(&String::from_utf8(out.stdout).unwrap())
        .into_iter()
        .filter(|r| r[1] == "fail")
        .map(|r| r[0].clone())
        .collect();
    assert_eq!(failed, ["fixture:corrupt:symmetric", "fixture:corrupt:moment_k4"]);
}

fn rerun_round_trip(dir: &TempDir, name: &str, args: &[&str]) {
    let file = dir.path().join(name);
    let target = file.display().to_string();
    let mut a: Vec<&str> = args.to_vec();
    a.extend(["--output", &target]);
    ok(&a);
    let original = std::fs::read(&file).unwrap();
    std::thread::sleep(std::time::Duration::from_millis(1100));
    assert_eq!(ok(&["rerun", &target]).into_bytes(), original);
    assert!(ok(&["rerun", &target, "--check"]).starts_with("identical"));

    let mut tampered = String::from_utf8(original).unwrap();
    tampered.push('\n');
    std::fs::write(&file, tampered).unwrap();
    assert_eq!(code(&["rerun", &target, "--check"]), 5);
}

#[test]
fn rerun_is_bit_identical() {
    let dir = TempDir::new().unwrap();
    let pair = write(&dir, "pair.json", PAIR);
    rerun_round_trip(&dir, "moment.json", &["moment", &pair, "--k", "6"]);
    rerun_round_trip(&dir, "sets.csv", &["index-sets", "--p", "3", "--k", "6", "--class", "c"]);
    rerun_round_trip(&dir, "conv.csv", &["converge", "--n", "1,2", "--model", "free", "--kmax", "6"]);
    rerun_round_trip(&dir, "sim.json", &["simulate", "--family", "pair_clt", "--n", "2", "--k", "4", "--samples", "5000"]);
}

#[test]
fn manifest_contents() {
    let text = Command::new(env!("CARGO_BIN_EXE_chaoskit"))
        .args(["simulate", "--family", "pair_clt", "--n", "2", "--k", "4", "--samples", "100", "--seed", "17"])
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .unwrap()
        .stdout;
    let doc: Value = serde_json::from_slice(&text).unwrap();
    let m = &doc["manifest"];
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["kernel_source"], "pair_clt n=2");
    assert_eq!(m["model"], "classical");
    assert_eq!(m["mode"], "exact");
    assert_eq!(m["seed"], 17);
    assert!(m["rng"].as_str().unwrap().contains("ChaCha8"));
    assert_eq!(m["timestamp"], "2023-11-14T22:13:20Z");
    assert!(m["versions"]["chaoskit"].is_string());
    assert!(Path::new(env!("CARGO_BIN_EXE_chaoskit")).exists());
}
