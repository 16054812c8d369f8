//! Exit-code contract of the binary on the shipped fixture files.

use std::path::PathBuf;
use std::process::Command;

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name);
    p.to_str().unwrap().to_string()
}

fn weakcut(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_weakcut"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).to_string(),
        String::from_utf8_lossy(&out.stderr).to_string(),
    )
}

#[test]
fn check_pass_exits_zero() {
    let (code, stdout, _) = weakcut(&[
        "check",
        &fixture("k43_graph.json"),
        &fixture("k43_per_region.json"),
    ]);
    assert_eq!(code, 0, "stdout: {stdout}");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["verdict"]["status"], "pass");
    assert_eq!(v["majority_condition"], true);
    assert_eq!(v["classical_condition"], false);
    assert_eq!(v["connectivity"], 3);
}

#[test]
fn check_violation_exits_two_with_witness() {
    let (code, stdout, _) = weakcut(&[
        "check",
        &fixture("k43_graph.json"),
        &fixture("k43_threshold2.json"),
    ]);
    assert_eq!(code, 2, "stdout: {stdout}");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["verdict"]["status"], "violation");
    assert_eq!(v["verdict"]["witness"]["cut"]["members"], serde_json::json!(["a", "b", "c"]));
}

#[test]
fn check_malformed_input_exits_one() {
    let dir = std::env::temp_dir().join("weakcut-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let (code, _, stderr) = weakcut(&[
        "check",
        bad.to_str().unwrap(),
        &fixture("k43_per_region.json"),
    ]);
    assert_eq!(code, 1, "stderr: {stderr}");
}

#[test]
fn check_missing_file_exits_one() {
    let (code, _, stderr) = weakcut(&[
        "check",
        "/nonexistent/graph.json",
        &fixture("k43_per_region.json"),
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("cannot read"), "stderr: {stderr}");
}

#[test]
fn simulate_feasible_scenario_exits_zero() {
    let (code, stdout, _) = weakcut(&[
        "simulate",
        &fixture("scenario_k43_feasible.json"),
        &fixture("config_eig_f2.json"),
    ]);
    assert_eq!(code, 0, "stdout: {stdout}");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["outcome"]["agreement_holds"], true);
    assert_eq!(v["outcome"]["validity_holds"], true);
}

#[test]
fn simulate_chain_demo_scenario_exits_three() {
    let (code, stdout, _) = weakcut(&[
        "simulate",
        &fixture("scenario_k43_chain_mixed.json"),
        &fixture("config_eig_f2_expect_failure.json"),
    ]);
    // The mixed phase of the chain breaks agreement by construction; with
    // the expect-failure flag that is the demonstrated outcome.
    assert_eq!(code, 3, "stdout: {stdout}");
}

#[test]
fn simulate_invalid_byzantine_set_exits_one() {
    let dir = std::env::temp_dir().join("weakcut-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("invalid_byz.json");
    let mut scenario: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("scenario_k43_feasible.json")).unwrap())
            .unwrap();
    scenario["byzantine"] = serde_json::json!(["d", "e"]); // two on one side
    std::fs::write(&path, scenario.to_string()).unwrap();
    let (code, _, stderr) = weakcut(&[
        "simulate",
        path.to_str().unwrap(),
        &fixture("config_eig_f2.json"),
    ]);
    assert_eq!(code, 1, "stderr: {stderr}");
    assert!(stderr.contains("not a permitted fault set"), "stderr: {stderr}");
}

#[test]
fn sweep_single_placement_exits_zero() {
    // Threshold 0: the placement universe collapses to the empty set and a
    // single honest sweep runs per strategy/input pair.
    let dir = std::env::temp_dir().join("weakcut-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let template = dir.join("sweep_f0.json");
    let mut t: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("sweep_k43_per_region.json")).unwrap())
            .unwrap();
    t["fault_model"] = serde_json::json!({"kind": "threshold", "f": 0});
    std::fs::write(&template, t.to_string()).unwrap();
    let config = dir.join("config_f0.json");
    std::fs::write(&config, r#"{"mode":"eig_over_flood","f":0}"#).unwrap();
    let (code, stdout, _) = weakcut(&[
        "sweep",
        template.to_str().unwrap(),
        config.to_str().unwrap(),
        "--adversaries",
        "silent",
        "--symmetry",
    ]);
    assert_eq!(code, 0, "stdout: {stdout}");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["placements"], 1);
    assert_eq!(v["aggregates"]["agreement_failures"], 0);
}

#[test]
fn sweep_guard_exceeded_exits_one() {
    let (code, _, stderr) = weakcut(&[
        "sweep",
        &fixture("sweep_k43_per_region.json"),
        &fixture("config_eig_f2.json"),
        "--max-subsets",
        "10",
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("resource guard"), "stderr: {stderr}");
}

#[test]
fn demo_impossibility_exits_three_on_violation() {
    let (code, stdout, _) = weakcut(&[
        "demo-impossibility",
        &fixture("k43_graph.json"),
        &fixture("k43_threshold2.json"),
    ]);
    assert_eq!(code, 3, "stdout: {stdout}");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["u_views_equal"], true);
    assert_eq!(v["v_views_equal"], true);
    assert_eq!(v["ambiguity_outcome"]["outcome"], "ambiguous");
    assert_eq!(v["demonstrated"], true);
}

#[test]
fn shipped_chain_fixture_matches_the_derived_chain() {
    // The committed mixed-phase scenario must stay in sync with what the
    // chain construction derives for K4,3 under threshold 2.
    use weakcut_core::adversary::{ChainPhase, ReplayChain};
    use weakcut_core::fault::FaultModel;
    let chain = ReplayChain::from_violation(&weakcut_core::fixtures::k43(), &FaultModel::threshold(2))
        .unwrap();
    let derived = chain.scenario(ChainPhase::Mixed);
    let from_file = weakcut_core::sim::Scenario::from_json(
        &std::fs::read_to_string(fixture("scenario_k43_chain_mixed.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(from_file.byzantine, derived.byzantine);
    assert_eq!(from_file.inputs, derived.inputs);
    assert_eq!(from_file.adversary, derived.adversary);
    assert_eq!(from_file.seed, derived.seed);
}

#[test]
fn parse_errors_name_the_offending_file() {
    let dir = std::env::temp_dir().join("weakcut-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("named.json");
    std::fs::write(&bad, r#"{"nodes":["a","a"],"edges":[]}"#).unwrap();
    let (code, _, stderr) = weakcut(&[
        "check",
        bad.to_str().unwrap(),
        &fixture("k43_per_region.json"),
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("duplicate node `a`"), "stderr: {stderr}");
    assert!(stderr.contains("named.json"), "stderr: {stderr}");
}

#[test]
fn demo_impossibility_needs_a_violation() {
    let (code, _, stderr) = weakcut(&[
        "demo-impossibility",
        &fixture("k43_graph.json"),
        &fixture("k43_per_region.json"),
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("nothing to demonstrate"), "stderr: {stderr}");
}
