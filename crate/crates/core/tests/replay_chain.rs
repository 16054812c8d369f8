//! The executable indistinguishability chain on violation fixtures.

use std::sync::Arc;

use weakcut_core::adversary::{run_chain, ChainPhase, ReplayChain};
use weakcut_core::agreement::{AgreementConfig, AgreementProtocol};
use weakcut_core::fault::FaultModel;
use weakcut_core::fixtures;
use weakcut_core::graph::NodeId;
use weakcut_core::sim::{self, ProtocolSpec};

fn eig_protocol(f: usize) -> Arc<dyn ProtocolSpec> {
    Arc::new(AgreementProtocol {
        cfg: AgreementConfig::eig(f),
    })
}

#[test]
fn k43_chain_views_are_byte_identical() {
    let g = fixtures::k43();
    let m = FaultModel::threshold(2);
    let report = run_chain(&g, &m, &eig_protocol(2)).unwrap();
    assert!(report.u_views_equal, "U cannot tell all-zero from mixed");
    assert!(report.v_views_equal, "V cannot tell mixed from all-one");
    // The faulty sides really are the witness sides.
    assert_eq!(report.witness.cut.members.len(), 3);
    // And the runs are reproducible byte for byte.
    let again = run_chain(&g, &m, &eig_protocol(2)).unwrap();
    for (a, b) in report.transcripts.iter().zip(again.transcripts.iter()) {
        assert_eq!(a.canonical_bytes(), b.canonical_bytes());
    }
}

#[test]
fn cycle5_chain_views_are_byte_identical() {
    let g = fixtures::cycle5();
    let m = FaultModel::threshold(1);
    let report = run_chain(&g, &m, &eig_protocol(1)).unwrap();
    assert!(report.u_views_equal);
    assert!(report.v_views_equal);
}

#[test]
fn chain_refuses_pass_fixtures() {
    let g = fixtures::k43();
    let m = fixtures::k43_per_region();
    assert!(ReplayChain::from_violation(&g, &m).is_err());
    assert!(run_chain(&g, &m, &eig_protocol(2)).is_err());
}

#[test]
fn replay_strategy_rejects_mismatched_scenarios() {
    let g = fixtures::k43();
    let m = FaultModel::threshold(2);
    let chain = ReplayChain::from_violation(&g, &m).unwrap();
    let mut sc = chain.scenario(ChainPhase::AllZero);
    // Corrupt one input: the strategy must refuse to run.
    sc.inputs.insert(NodeId::from("g"), 1);
    assert!(sim::run(&sc, &eig_protocol(2), None).is_err());
}

#[test]
fn phase_inputs_and_faults_follow_the_witness() {
    let g = fixtures::k43();
    let m = FaultModel::threshold(2);
    let chain = ReplayChain::from_violation(&g, &m).unwrap();
    let z = chain.scenario(ChainPhase::AllZero);
    let x = chain.scenario(ChainPhase::Mixed);
    let o = chain.scenario(ChainPhase::AllOne);
    assert!(z.inputs.values().all(|&v| v == 0));
    assert!(o.inputs.values().all(|&v| v == 1));
    // Mixed: zero exactly on the U side.
    for (n, v) in &x.inputs {
        assert_eq!(*v == 0, chain.u_side.contains(n), "{n}");
    }
    assert_eq!(z.byzantine, chain.witness.part_a);
    assert_eq!(x.byzantine, chain.witness.part_b);
    assert_eq!(o.byzantine, chain.witness.part_a);
    // U and V are separated components of the violated cut.
    assert!(chain.u_side.is_disjoint(&chain.v_side));
}
