use std::path::Path;
use std::process::{Command, Output};

use hwsim::{apply_circuit, BasisIndexer, Circuit, Gate, SubspaceState};
use serde_json::Value;

fn hwsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hwsim")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hwsim(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fail(args: &[&str]) -> String {
    let out = hwsim(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "multi-line error: {err}");
    assert!(err.starts_with("error: "));
    err
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn basis_listings() {
    assert_eq!(ok(&["basis", "--n", "3", "--k", "2"]), "index,bitstring\n0,110\n1,101\n2,011\n");
    assert_eq!(ok(&["basis", "--n", "4", "--k", "0"]).lines().count(), 2);
    assert_eq!(ok(&["basis", "--n", "5", "--k", "2"]).lines().count(), 11);
    let v = json(&ok(&["basis", "--n", "5", "--k", "2", "--format", "json"]));
    assert_eq!(v["schema"], "hwsim/1");
    assert_eq!(v["dim"], 10);
    fail(&["basis", "--n", "3", "--k", "4"]);
}

#[test]
fn designed_circuit_feeds_every_consumer() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("loader.json");
    let design = design.to_str().unwrap();
    ok(&["design", "--graph", "aspen5", "--k", "2", "--out", design]);
    let v = json(&std::fs::read_to_string(design).unwrap());
    assert_eq!(v["schema"], "hwsim/1");
    assert_eq!(v["design"]["final_rank"], 9);
    assert_eq!(v["seed"], 0);

    let check = json(&ok(&["check", "--circuit", design, "--k", "2"]));
    assert!(check["orthogonality_residual"].as_f64().unwrap() < 1e-10);

    let sim = ok(&["simulate", "--circuit", design, "--k", "2", "--theta", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,-0.9"]);
    assert_eq!(sim.lines().count(), 11);

    // a state the loader can reach: its own output at known angles
    let target = write(dir.path(), "target.csv", &sim);
    let trained = dir.path().join("trained.json");
    let trained = trained.to_str().unwrap();
    ok(&["train", "--circuit", design, "--k", "2", "--target", &target, "--method", "adam", "--restarts", "3", "--out", trained]);
    let t = json(&std::fs::read_to_string(trained).unwrap());
    assert!(t["train"]["final_cost"].as_f64().unwrap() < 1e-3);
    // the trained file is itself a circuit
    ok(&["check", "--circuit", trained, "--k", "2"]);
}

#[test]
fn simulate_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let c = Circuit::from_gates(4, [Gate::rbs(0, 1, 0.4), Gate::fbs(0, 3, 1.3), Gate::rbs(1, 2, -2.0)]).unwrap();
    let path = write(dir.path(), "c.json", &c.to_json());
    let out = hwsim(&["simulate", "--circuit", &path, "--k", "2", "--initial", "0110"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stderr).trim(), "norm = 1.000000000000");
    let idx = BasisIndexer::new(4, 2).unwrap();
    let input = SubspaceState::basis(idx.clone(), idx.rank(0b0110).unwrap()).unwrap();
    let expect = apply_circuit(&c, &input, 2).unwrap().to_csv();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), expect);
}

#[test]
fn empty_circuit_echoes_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "id.json", r#"{"schema": "hwsim/1", "n": 3, "gates": []}"#);
    let csv = ok(&["simulate", "--circuit", &path, "--k", "1", "--initial", "1"]);
    let amps: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(amps.iter().map(|a| a.parse::<f64>().unwrap()).collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
}

#[test]
fn compound_residual_reported_for_both_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let fbs = Circuit::from_gates(4, [Gate::fbs(0, 2, 0.7), Gate::fbs(1, 3, -1.1), Gate::fbs(0, 3, 2.2)]).unwrap();
    let rbs = Circuit::from_gates(4, [Gate::rbs(0, 2, 0.7), Gate::rbs(1, 3, -1.1), Gate::rbs(0, 3, 2.2)]).unwrap();
    let f = json(&ok(&["check", "--circuit", &write(dir.path(), "f.json", &fbs.to_json()), "--k", "2"]));
    let r = json(&ok(&["check", "--circuit", &write(dir.path(), "r.json", &rbs.to_json()), "--k", "2"]));
    assert_eq!(f["fbs_only"], true);
    assert!(f["compound_residual"].as_f64().unwrap() < 1e-10);
    assert!(r["compound_residual"].as_f64().unwrap() > 1e-2);
}

#[test]
fn dla_reports_dimension_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write(dir.path(), "line5.json", r#"{"n": 5, "edges": [[0,1],[1,2],[2,3],[3,4]]}"#);
    let rbs = json(&ok(&["dla", "--graph", &graph, "--k", "2", "--gate", "rbs"]));
    let fbs = json(&ok(&["dla", "--graph", "line", "--n", "5", "--k", "2", "--gate", "fbs"]));
    assert_eq!(rbs["orthogonal_bound"], 45);
    assert_eq!(rbs["dla_dim"], fbs["dla_dim"]);
    assert!(fbs["dla_dim"].as_u64().unwrap() <= fbs["fbs_bound"].as_u64().unwrap());
}

#[test]
fn variance_is_deterministic_across_thread_counts() {
    let args = ["variance", "--n", "4", "--k", "1,2", "--layers", "1,2", "--gate", "rbs,fbs", "--samples", "300", "--seed", "7"];
    let a = ok(&args);
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "1"]);
    assert_eq!(a, ok(&threaded));
    assert!(a.starts_with("n,k,gate,param_index,mean,var,stderr,theory_var,lambda0"));
    // 2 k values x (4 + 8 gates) x 2 kinds
    assert_eq!(a.lines().count(), 1 + 2 * 12 * 2);
    let other = ok(&["variance", "--n", "4", "--k", "1,2", "--layers", "1,2", "--gate", "rbs,fbs", "--samples", "300", "--seed", "8"]);
    assert_ne!(a, other);
}

#[test]
fn variance_sweep_file() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write(
        dir.path(),
        "sweep.json",
        r#"{"n": [4], "k": [2], "L": [1, 3], "gate": ["rbs"], "input_mode": {"basis_point": 0}, "samples": 200, "seed": 3}"#,
    );
    let v = json(&ok(&["variance", "--sweep", &sweep, "--format", "json"]));
    assert_eq!(v["seed"], 3);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4 + 12);
    assert!(rows.iter().all(|r| r["lambda0"].as_u64().unwrap() >= 1));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"n": 4, "k": 2, "format": "json"}"#);
    let v = json(&ok(&["basis", "--config", &cfg]));
    assert_eq!(v["dim"], 6);
    let v = json(&ok(&["basis", "--config", &cfg, "--k", "1"]));
    assert_eq!(v["dim"], 4);
    let csv = ok(&["basis", "--config", &cfg, "--format", "csv"]);
    assert!(csv.starts_with("index,bitstring"));
}

#[test]
fn qfim_echoes_seed_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("full4.json");
    let path = path.to_str().unwrap().to_string();
    ok(&["design", "--graph", "full", "--n", "4", "--k", "2", "--out", &path]);
    let args = ["qfim", "--circuit", path.as_str(), "--k", "2", "--samples", "4", "--seed", "12"];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let v = json(&a);
    assert_eq!(v["seed"], 12);
    assert_eq!(v["max_rank"], 5);
}

#[test]
fn failures_are_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"n": 3, "gates": [{"kind": "rbs", "i": 0, "j": 1, "theta": 0.1}, {"kind": "rbs", "i": 2, "j": 1, "theta": 0.0}]}"#);
    assert!(fail(&["check", "--circuit", &bad, "--k", "1"]).contains("gates[1]"));
    let typo = write(dir.path(), "typo.json", "{\"n\": 3,\n \"gates\": [{\"kind\": \"xyz\", \"i\": 0, \"j\": 1, \"theta\": 0.1}]}");
    assert!(fail(&["simulate", "--circuit", &typo, "--k", "1"]).contains("line 2"));
    let schema = write(dir.path(), "v2.json", r#"{"schema": "hwsim/2", "n": 2, "gates": []}"#);
    assert!(fail(&["check", "--circuit", &schema, "--k", "1"]).contains("schema"));
    fail(&["simulate", "--k", "1"]);
    fail(&["check", "--circuit", "/nonexistent.json", "--k", "1"]);
    fail(&["dla", "--graph", "full", "--k", "2"]);
    fail(&["qfim", "--circuit", &bad, "--k", "1", "--format", "csv"]);
}

#[test]
fn dk_cap_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_hwsim"))
        .args(["dla", "--graph", "full", "--n", "5", "--k", "2"])
        .env("HWSIM_DKCAP", "8")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("resource limit"));
}
