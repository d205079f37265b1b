use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

// x3 = x1, x4 = x2, x5 = x3 & x4, and x5 must hold
const GATES: &str = "c input 1 2
p cnf 5 8
-1 3 0
1 -3 0
-2 4 0
2 -4 0
-3 -4 5 0
3 -5 0
4 -5 0
5 0
";

// the gates above without the unit clause, plus x1 | x2 and !(x1 & x5)
const GATES_XOR: &str = "c input 1 2
p cnf 5 9
-1 3 0
1 -3 0
-2 4 0
2 -4 0
-3 -4 5 0
3 -5 0
4 -5 0
1 2 0
-1 -5 0
";

fn mergevar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mergevar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn read_json(path: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn clauses(text: &str) -> Vec<Vec<i32>> {
    text.lines()
        .filter(|l| !l.starts_with('c') && !l.starts_with('p'))
        .map(|l| l.split_whitespace().map(|w| w.parse().unwrap()).take_while(|&x| x != 0).collect())
        .collect()
}

fn satisfies(clauses: &[Vec<i32>], bits: &[bool]) -> bool {
    clauses
        .iter()
        .all(|c| c.iter().any(|&l| bits[l.unsigned_abs() as usize - 1] == (l > 0)))
}

#[test]
fn onemax_mvea_three_runs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.json").display().to_string();
    let res = mergevar(&[
        "run", "--objective", "onemax", "--algo", "mvea", "--n", "20", "--r", "5", "--repeats", "3",
        "--budget-evals", "100000", "--seed", "5", "--out", &out,
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report = read_json(&out);
    assert_eq!(report["runs"].as_array().unwrap().len(), 3);
    assert_eq!(report["aggregate"]["runs"], 3);
    assert!(report["aggregate"]["mean_evaluations"].is_number());
    assert!(report["aggregate"]["median_evaluations"].is_number());
    assert!(report["timing"]["mean_run_secs"].is_number());
    let seeds: Vec<u64> = report["runs"].as_array().unwrap().iter().map(|r| r["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, vec![5, 6, 7]);
    assert_eq!(report["config"]["r"], 5);
}

#[test]
fn missing_cnf_is_a_config_error() {
    let res = mergevar(&["run", "--objective", "maxsat", "--algo", "hc"]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("cnf"), "{}", stderr(&res));
    let res = mergevar(&["run", "--objective", "maxsat", "--algo", "hc", "--cnf", "/nonexistent.cnf"]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("cnf"));
}

#[test]
fn invalid_fields_exit_one_and_are_named() {
    let cases: [(&[&str], &str); 4] = [
        (&["run", "--objective", "onemax", "--algo", "mvhc", "--n", "10"], "r:"),
        (&["run", "--objective", "onemax", "--algo", "hc"], "n:"),
        (&["run", "--objective", "onemax", "--algo", "mvhc", "--n", "10", "--r", "10"], "r:"),
        (&["run", "--objective", "onemax", "--algo", "hc", "--n", "10", "--repeats", "0"], "repeats"),
    ];
    for (args, name) in cases {
        let res = mergevar(args);
        assert_eq!(code(&res), 1, "{args:?}");
        assert!(stderr(&res).contains(name), "{args:?}: {}", stderr(&res));
    }
    let res = mergevar(&["run", "--objective", "onemax", "--algo", "nope"]);
    assert_eq!(code(&res), 1);
    let res = mergevar(&["run", "--n", "5"]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("objective"));
}

#[test]
fn upsat_target_reached_with_satisfying_assignment() {
    let dir = TempDir::new().unwrap();
    let cnf = write(dir.path(), "gates.cnf", GATES);
    let out = dir.path().join("report.json").display().to_string();
    let res = mergevar(&[
        "run", "--objective", "upsat", "--cnf", &cnf, "--algo", "mvhc", "--r", "1", "--target", "8",
        "--budget-evals", "1000", "--out", &out,
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report = read_json(&out);
    let run = &report["runs"][0];
    assert_eq!(run["reached_target"], true);
    assert_eq!(run["satisfied_clauses"], 8);
    let assignment: Vec<bool> = run["assignment"].as_str().unwrap().chars().map(|c| c == '1').collect();

    let cls = clauses(GATES);
    let models: Vec<Vec<bool>> = (0u32..32)
        .map(|m| (0..5).map(|i| m >> i & 1 == 1).collect::<Vec<bool>>())
        .filter(|bits| satisfies(&cls, bits))
        .collect();
    assert_eq!(models.len(), 1);
    assert_eq!(assignment, models[0]);
}

#[test]
fn unreached_target_exits_two() {
    let res = mergevar(&[
        "run", "--objective", "onemax", "--algo", "hc", "--n", "10", "--target", "11", "--out", "/dev/null",
    ]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
    let res = mergevar(&[
        "run", "--objective", "onemax", "--algo", "hc", "--n", "10", "--target", "10", "--out", "/dev/null",
    ]);
    assert_eq!(code(&res), 0);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "gates.cnf", GATES);
    let config = write(
        dir.path(),
        "exp.toml",
        "objective = \"maxsat\"\ncnf = \"gates.cnf\"\nalgo = \"mvhc\"\nr = 2\nk = 3\nseed = 9\nbudget_evals = 500\n",
    );
    let out = dir.path().join("report.json").display().to_string();
    let res = mergevar(&["run", "--config", &config, "--seed", "4", "--K", "6", "--out", &out]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report = read_json(&out);
    assert_eq!(report["config"]["seed"], 4);
    assert_eq!(report["config"]["K"], 6);
    assert_eq!(report["config"]["r"], 2);
    assert_eq!(report["config"]["budget_evals"], 500);
    assert_eq!(report["objective"]["num_clauses"], 8);

    let bad = write(dir.path(), "bad.toml", "objective = \"onemax\"\nalgo = \"hc\"\nn = 5\nbudget = 3\n");
    let res = mergevar(&["run", "--config", &bad]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("budget"), "{}", stderr(&res));
}

#[test]
fn reruns_match_outside_timing() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name).display().to_string();
        let res = mergevar(&[
            "run", "--objective", "trap", "--algo", "mvhc", "--n", "14", "--r", "4", "--repeats", "2",
            "--budget-evals", "5000", "--restart", "--seed", "3", "--out", &out,
        ]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        let mut report = read_json(&out);
        report.as_object_mut().unwrap().remove("timing");
        report
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn improvement_log_is_json_lines() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("log.jsonl").display().to_string();
    let res = mergevar(&[
        "run", "--objective", "onemax", "--algo", "ea", "--n", "12", "--budget-evals", "2000", "--out", "/dev/null",
        "--log", &log,
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = fs::read_to_string(&log).unwrap();
    let mut last = f64::NEG_INFINITY;
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["algo"], "ea");
        let value = v["value"].as_f64().unwrap();
        assert!(value > last);
        last = value;
    }
    assert!(last > 0.0);
}

#[test]
fn verify_full_and_partial_assignments() {
    let dir = TempDir::new().unwrap();
    let cnf = write(dir.path(), "gates.cnf", GATES);
    let res = mergevar(&["verify", "--cnf", &cnf, "--assignment", "11111"]);
    assert_eq!(code(&res), 0);
    assert_eq!(String::from_utf8_lossy(&res.stdout).trim(), "8/8 satisfied");

    let res = mergevar(&["verify", "--cnf", &cnf, "--assignment", "10100"]);
    assert_eq!(code(&res), 2);
    let cls = clauses(GATES);
    let bits = [true, false, true, false, false];
    let expect = cls.iter().filter(|c| satisfies(&[c.to_vec()], &bits)).count();
    assert_eq!(String::from_utf8_lossy(&res.stdout).trim(), format!("{expect}/8 satisfied"));

    // input-only assignments are completed by propagation
    let cnf = write(dir.path(), "xor.cnf", GATES_XOR);
    let cls = clauses(GATES_XOR);
    for (partial, full) in [("11", "11111"), ("10", "10100"), ("01", "01010"), ("00", "00000")] {
        let a = mergevar(&["verify", "--cnf", &cnf, "--assignment", partial]);
        let b = mergevar(&["verify", "--cnf", &cnf, "--assignment", full]);
        assert_eq!(code(&a), code(&b), "{partial}");
        assert_eq!(a.stdout, b.stdout, "{partial}");
        let bits: Vec<bool> = full.chars().map(|c| c == '1').collect();
        let satisfied = cls.iter().filter(|c| satisfies(&[c.to_vec()], &bits)).count();
        assert_eq!(String::from_utf8_lossy(&a.stdout).trim(), format!("{satisfied}/9 satisfied"));
        assert_eq!(code(&a), if satisfied == 9 { 0 } else { 2 });
    }
    let inputs = write(dir.path(), "inputs.txt", "2 1\n");
    let a = mergevar(&["verify", "--cnf", &cnf, "--assignment", "10", "--input-vars", &inputs]);
    let b = mergevar(&["verify", "--cnf", &cnf, "--assignment", "01010"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(code(&a), 0);
}

#[test]
fn verify_rejects_malformed_input() {
    let dir = TempDir::new().unwrap();
    let cnf = write(dir.path(), "gates.cnf", GATES);
    for assignment in ["111", "1x111", ""] {
        let res = mergevar(&["verify", "--cnf", &cnf, "--assignment", assignment]);
        assert_eq!(code(&res), 1, "{assignment:?}");
    }
    let broken = write(dir.path(), "broken.cnf", "p cnf 2 2\n1 2 0\n");
    let res = mergevar(&["verify", "--cnf", &broken, "--assignment", "11"]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("line"));
}

#[test]
fn counting_and_bounds() {
    let res = mergevar(&["count-mappings", "--n", "6"]);
    assert_eq!(String::from_utf8_lossy(&res.stdout).trim(), "3963");
    let res = mergevar(&["bounds", "--n", "27", "--delta", "3"]);
    assert_eq!(code(&res), 0);
    let text = String::from_utf8_lossy(&res.stdout).into_owned();
    let exponent: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("uniform exponent: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((exponent - 17.3567).abs() < 1e-4);
    let res = mergevar(&["bounds", "--n", "4", "--r", "2", "--l", "2"]);
    assert!(String::from_utf8_lossy(&res.stdout).contains("mvea bound: 64"));
    let res = mergevar(&["bounds", "--n", "4", "--r", "2"]);
    assert_eq!(code(&res), 1);
}
