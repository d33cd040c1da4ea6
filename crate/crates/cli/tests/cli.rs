use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use locc_core::bipartite::{random_density, schmidt_decompose, SchmidtDecomposition};
use locc_core::positivity_maps::HermitianPreservingMap;
use locc_core::protocol::{verify, Protocol};
use locc_core::{DensityMatrix, Dims, Ensemble, PureState, SchmidtVector};
use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_locc-lab"));
    cmd.env_remove("LOCC_LAB_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_temp(name: &str, value: &impl serde::Serialize) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("locc-lab-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(value).unwrap()).unwrap();
    path
}

fn sv(v: &[f64]) -> SchmidtVector {
    SchmidtVector::new(v.to_vec()).unwrap()
}

fn bell() -> PureState {
    PureState::standard_form(Dims(2, 2), &sv(&[0.5, 0.5])).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn convert_to_itself_is_an_empty_exact_protocol() {
    let out = run(&["convert", "0.7,0.3", "0.7,0.3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["feasible"], true);
    let protocol: Protocol = serde_json::from_value(v["protocol"].clone()).unwrap();
    assert!(protocol.steps.is_empty());
}

#[test]
fn exact_protocol_round_trips_and_verifies() {
    let source = write_temp("src3.json", &PureState::standard_form(Dims(3, 3), &sv(&[0.5, 0.3, 0.2])).unwrap());
    let out = run(&["convert", s(&source), "0.7,0.2,0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let protocol: Protocol = serde_json::from_value(v["protocol"].clone()).unwrap();
    assert!(verify(&protocol).unwrap().passed(1e-9, 1e-8));
    let again = serde_json::to_value(&protocol).unwrap();
    assert_eq!(again, v["protocol"]);
}

#[test]
fn infeasible_exact_conversion_exits_two() {
    let out = run(&["convert", "0.8,0.2", "0.5,0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&out);
    assert_eq!(v["feasible"], false);
    assert!((v["max_probability"].as_f64().unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn probabilistic_and_fidelity_modes() {
    let out = run(&["convert", "0.8,0.2", "0.5,0.5", "--mode", "prob"]);
    assert_eq!(out.status.code(), Some(0));
    assert!((stdout_json(&out)["p_max"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    let out = run(&["convert", "0.5,0.5,0", "0.5,0.3,0.2", "--mode", "fidelity"]);
    assert!((stdout_json(&out)["fidelity"].as_f64().unwrap() - 0.8f64.sqrt()).abs() < 1e-9);
}

#[test]
fn schmidt_output_round_trips() {
    let psi = locc_core::bipartite::random_pure(Dims(2, 3), 4).unwrap();
    let path = write_temp("psi23.json", &psi);
    let out = run(&["schmidt", s(&path)]);
    assert_eq!(out.status.code(), Some(0));
    let parsed: SchmidtDecomposition = serde_json::from_slice(&out.stdout).unwrap();
    let direct = schmidt_decompose(&psi).unwrap();
    for (a, b) in parsed.coefficients.values().iter().zip(direct.coefficients.values()) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!(parsed.reconstruct().unwrap().overlap(&psi) > 1.0 - 1e-12);
}

#[test]
fn product_source_cannot_reach_entangled_state() {
    let rho = write_temp("bell_rho.json", &DensityMatrix::from_pure(&bell()));
    let closed = run(&["membership", s(&rho), "--mu", "1,0"]);
    assert_eq!(closed.status.code(), Some(2));
    assert_eq!(stdout_json(&closed)["status"], "not_found");
    assert_eq!(stdout_json(&closed)["method"], "closed_form");

    let numeric = run(&["membership", s(&rho), "--mu", "1,0", "--force-numeric", "--restarts", "4"]);
    assert_eq!(numeric.status.code(), Some(2));
    assert_eq!(stdout_json(&numeric)["status"], "not_found");
    assert!(stderr(&numeric).contains("no certificate found (violation"));
}

#[test]
fn membership_certificate_is_an_ensemble() {
    let rho = random_density(Dims(3, 3), 2, 2).unwrap();
    let path = write_temp("rho33.json", &rho);
    let out = run(&["membership", s(&path), "--mu", "0.4,0.3,0.3", "--restarts", "8"]);
    let v = stdout_json(&out);
    if out.status.code() == Some(0) {
        let cert: Ensemble = serde_json::from_value(v["certificate"].clone()).unwrap();
        assert!(locc_core::ensemble_protocols::ensemble_reachable(&sv(&[0.4, 0.3, 0.3]), &cert).unwrap());
    } else {
        assert_eq!(out.status.code(), Some(2));
        assert!(v["violation"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn output_is_seed_deterministic() {
    let rho = write_temp("rho22.json", &random_density(Dims(2, 2), 3, 8).unwrap());
    let args = ["membership", s(&rho), "--mu", "0.9,0.1", "--force-numeric", "--restarts", "8", "--seed", "5"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let c = bin()
        .args(&args[..args.len() - 2])
        .env("LOCC_LAB_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(a.stdout, c.stdout);
    let mut one_thread: Vec<&str> = args.to_vec();
    one_thread.extend(["--threads", "1"]);
    assert_eq!(run(&one_thread).stdout, a.stdout);
}

#[test]
fn malformed_json_reports_byte_offset() {
    let dir = std::env::temp_dir().join(format!("locc-lab-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("broken.json");
    std::fs::write(&path, "{\"dims\":[2,2],\"matrix\":[[").unwrap();
    let out = run(&["qubit2", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("rho:") && err.contains("byte offset"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn dimension_mismatch_names_the_argument() {
    let source = write_temp("bell_pure.json", &bell());
    let out = run(&["convert", s(&source), "0.4,0.3,0.3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("target:"), "{}", stderr(&out));
}

#[test]
fn qubit2_reports_closed_forms() {
    let rho = write_temp("bell_rho2.json", &DensityMatrix::from_pure(&bell()));
    let out = run(&["qubit2", s(&rho), "--mu2", "0.2", "--p", "0.4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["C"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((v["EoF"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v["exact"], false);
    assert_eq!(v["prob"], true);
}

#[test]
fn monotone_of_pure_state_is_its_tail() {
    let psi = PureState::standard_form(Dims(3, 3), &sv(&[0.5, 0.3, 0.2])).unwrap();
    let rho = write_temp("pure33.json", &DensityMatrix::from_pure(&psi));
    let out = run(&["monotone", s(&rho), "--l", "2", "--restarts", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!((stdout_json(&out)["value"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn transpose_map_positivity() {
    let map = write_temp("transpose.json", &HermitianPreservingMap::transpose(2));
    let bad = run(&["mu-positive", s(&map), "--mu", "0.5,0.5", "--samples", "500"]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(stdout_json(&bad)["status"], "violation");
    let ok = run(&["mu-positive", s(&map), "--mu", "1,0", "--samples", "500"]);
    assert_eq!(ok.status.code(), Some(0));
    let both = run(&["mu-positive", s(&map), "--mu", "1,0", "--samples", "500", "--implication"]);
    assert_eq!(stdout_json(&both)["consistent"], true);
}

#[test]
fn ensemble_subcommand_emits_protocol() {
    let e = Ensemble::new(vec![
        (0.5, PureState::basis(Dims(2, 2), 0, 0).unwrap()),
        (0.5, bell()),
    ])
    .unwrap();
    let path = write_temp("ens.json", &e);
    let out = run(&["ensemble", "0.7,0.3", s(&path)]);
    assert_eq!(out.status.code(), Some(0));
    let protocol: Protocol = serde_json::from_slice(&out.stdout).unwrap();
    assert!(verify(&protocol).unwrap().passed(1e-9, 1e-8));
    let far = run(&["ensemble", "1,0", s(&path)]);
    assert_eq!(far.status.code(), Some(2));
}

#[test]
fn reproduce_cases() {
    let out = run(&["reproduce", "--case", "example1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["splus"]["status"], "member");
    assert_eq!(v["hull_structural_non_membership"], true);
    let cert: Ensemble = serde_json::from_value(v["splus"]["certificate"].clone()).unwrap();
    let avg = locc_core::majorization::average_schmidt_vector(&cert).unwrap();
    assert!((avg.values()[0] - 0.75).abs() < 1e-9);

    let out = run(&["reproduce", "--case", "theorem4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!((stdout_json(&out)["p_max_to_bell"].as_f64().unwrap() - 0.4).abs() < 1e-12);

    let out = run(&["reproduce", "--case", "example2"]);
    assert_eq!(out.status.code(), Some(0));
}
