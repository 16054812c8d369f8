//! Agreement end to end: the information-gathering protocol over relayed
//! channels, the oracle equivalence against a direct complete-graph run, and
//! the trusted-leader / trusted-subgraph variants.

use std::collections::BTreeMap;
use std::sync::Arc;

use weakcut_core::adversary;
use weakcut_core::agreement::{
    run_agreement, run_trusted_leader, run_trusted_subgraph, AgreementConfig, AgreementProtocol,
};
use weakcut_core::fault::FaultModel;
use weakcut_core::fixtures;
use weakcut_core::flood::PathMessage;
use weakcut_core::graph::{Graph, NodeId, NodeSet};
use weakcut_core::sim::{
    self, Adversary, AdversarySpec, InputValue, NodeIdx, Process, ProtocolEnv, ProtocolSpec,
    Scenario, SimCtx, SimEnvelope,
};

fn nid(s: &str) -> NodeId {
    NodeId::from(s)
}

fn set(names: &[&str]) -> NodeSet {
    names.iter().map(|s| nid(s)).collect()
}

fn scenario(
    graph: &Graph,
    model: &FaultModel,
    byzantine: NodeSet,
    inputs: BTreeMap<NodeId, InputValue>,
    adversary: &str,
) -> Scenario {
    Scenario {
        graph: graph.clone(),
        fault_model: model.clone(),
        byzantine,
        inputs,
        adversary: AdversarySpec::named(adversary),
        seed: 3,
    }
}

fn uniform_inputs(graph: &Graph, v: InputValue) -> BTreeMap<NodeId, InputValue> {
    graph.nodes().iter().map(|n| (n.clone(), v)).collect()
}

fn inputs_from_mask(graph: &Graph, mask: u64) -> BTreeMap<NodeId, InputValue> {
    graph
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), ((mask >> i) & 1) as InputValue))
        .collect()
}

// ---------------------------------------------------------------------------
// Independent oracle: information gathering on a real complete graph with
// direct channels and no faults.
// ---------------------------------------------------------------------------

fn oracle_majority(
    tree: &BTreeMap<Vec<usize>, u8>,
    n: usize,
    depth: usize,
    label: &mut Vec<usize>,
) -> u8 {
    if label.len() == depth {
        return *tree.get(label).unwrap_or(&0);
    }
    let mut ones = 0;
    let mut zeros = 0;
    for j in 0..n {
        if !label.contains(&j) {
            label.push(j);
            if oracle_majority(tree, n, depth, label) == 1 {
                ones += 1;
            } else {
                zeros += 1;
            }
            label.pop();
        }
    }
    u8::from(ones > zeros)
}

/// Direct-channel information gathering with zero faults: every exchange is
/// a plain map copy. Independent of the relay/simulator stack.
fn direct_complete_graph_eig(
    names: &[NodeId],
    inputs: &BTreeMap<NodeId, InputValue>,
    f: usize,
) -> BTreeMap<NodeId, InputValue> {
    let n = names.len();
    let mut trees: Vec<BTreeMap<Vec<usize>, u8>> = (0..n)
        .map(|i| {
            let mut t = BTreeMap::new();
            t.insert(Vec::new(), inputs[&names[i]]);
            t
        })
        .collect();
    for level in 0..=f {
        // Each sender ships its level entries (labels not containing it);
        // receivers append the sender.
        let mut shipped: Vec<Vec<(Vec<usize>, u8)>> = Vec::with_capacity(n);
        for (j, tree) in trees.iter().enumerate() {
            let entries: Vec<(Vec<usize>, u8)> = tree
                .iter()
                .filter(|(l, _)| l.len() == level && !l.contains(&j))
                .map(|(l, v)| (l.clone(), *v))
                .collect();
            shipped.push(entries);
        }
        for (j, entries) in shipped.iter().enumerate() {
            for tree in trees.iter_mut() {
                for (l, v) in entries {
                    let mut label = l.clone();
                    label.push(j);
                    tree.insert(label, *v);
                }
            }
        }
    }
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            (
                name.clone(),
                oracle_majority(&trees[i], n, f + 1, &mut Vec::new()),
            )
        })
        .collect()
}

#[test]
fn unanimous_inputs_decide_that_value() {
    let g = fixtures::k43();
    let m = fixtures::k43_per_region();
    for v in [0u8, 1] {
        let sc = scenario(&g, &m, NodeSet::new(), uniform_inputs(&g, v), "silent");
        let (outcome, _) = run_agreement(&sc, &AgreementConfig::eig(2)).unwrap();
        assert!(outcome.agreement_holds && outcome.validity_holds);
        assert!(outcome.decisions.values().all(|d| *d == Some(v)));
    }
}

#[test]
fn faultless_runs_match_the_direct_complete_graph_oracle() {
    let cases: Vec<(Graph, FaultModel, usize)> = vec![
        (fixtures::k43(), fixtures::k43_per_region(), 2),
        (fixtures::k43(), FaultModel::threshold(1), 1),
        (fixtures::k4(), FaultModel::threshold(1), 1),
        (fixtures::path3(), FaultModel::threshold(0), 0),
        (fixtures::unknown_graph8(), FaultModel::threshold(1), 1),
    ];
    for (g, m, f) in cases {
        for mask in [0u64, 1, 0b1010101, (1 << g.node_count()) - 1, 0b0110] {
            let mask = mask & ((1 << g.node_count()) - 1);
            let inputs = inputs_from_mask(&g, mask);
            let sc = scenario(&g, &m, NodeSet::new(), inputs.clone(), "silent");
            let (outcome, _) = run_agreement(&sc, &AgreementConfig::eig(f)).unwrap();
            let expect = direct_complete_graph_eig(g.nodes(), &inputs, f);
            for (node, decided) in &outcome.decisions {
                assert_eq!(
                    *decided,
                    Some(expect[node]),
                    "node {node} mask {mask:b} on {:?}",
                    g.nodes()
                );
            }
        }
    }
}

#[test]
fn k4_single_fault_all_placements_and_strategies_agree() {
    let g = fixtures::k4();
    let m = FaultModel::threshold(1);
    let placements: Vec<NodeSet> = m.enumerate_maximal_fault_sets(&g.node_set()).unwrap();
    for placement in placements {
        for strategy in adversary::sweep_strategies() {
            for mask in 0u64..(1 << g.node_count()) {
                let sc = scenario(
                    &g,
                    &m,
                    placement.clone(),
                    inputs_from_mask(&g, mask),
                    strategy,
                );
                let (outcome, _) = run_agreement(&sc, &AgreementConfig::eig(1)).unwrap();
                assert!(
                    outcome.agreement_holds && outcome.validity_holds,
                    "byz {placement:?} strategy {strategy} mask {mask:b}: {outcome:?}"
                );
            }
        }
    }
}

#[test]
fn decode_failures_contribute_defaults_not_crashes() {
    // A silent Byzantine origin produces NoMessage on its own sessions;
    // the run still completes with agreement among honest nodes.
    let g = fixtures::k4();
    let m = FaultModel::threshold(1);
    let sc = scenario(&g, &m, set(&["a"]), uniform_inputs(&g, 1), "silent");
    let (outcome, _) = run_agreement(&sc, &AgreementConfig::eig(1)).unwrap();
    assert!(outcome.agreement_holds && outcome.validity_holds);
}

// ---------------------------------------------------------------------------
// Trusted leader
// ---------------------------------------------------------------------------

#[test]
fn star_leader_survives_all_leaves_byzantine() {
    let g = fixtures::star6();
    let m = FaultModel::threshold(5).with_trusted([nid("center")]);
    let cfg = AgreementConfig::trusted_leader(set(&["center"]));
    let all_leaves = set(&["l1", "l2", "l3", "l4", "l5"]);
    for strategy in adversary::sweep_strategies() {
        for v in [0u8, 1] {
            let mut inputs = uniform_inputs(&g, 1 - v);
            inputs.insert(nid("center"), v);
            let sc = scenario(&g, &m, all_leaves.clone(), inputs, strategy);
            let (outcome, _) = run_trusted_leader(&sc, &cfg).unwrap();
            assert!(outcome.agreement_holds);
            for (node, d) in &outcome.decisions {
                assert_eq!(*d, Some(v), "{node} under {strategy}");
            }
        }
    }
}

#[test]
fn leader_value_reaches_all_honest_nodes_under_partial_placements() {
    let g = fixtures::star6();
    let m = FaultModel::threshold(5).with_trusted([nid("center")]);
    let cfg = AgreementConfig::trusted_leader(set(&["center"]));
    for byz_mask in 0u64..(1 << 5) {
        let byz: NodeSet = (0..5)
            .filter(|i| byz_mask & (1 << i) != 0)
            .map(|i| nid(&format!("l{}", i + 1)))
            .collect();
        let mut inputs = uniform_inputs(&g, 0);
        inputs.insert(nid("center"), 1);
        let sc = scenario(&g, &m, byz, inputs, "equivocate");
        let (outcome, _) = run_trusted_leader(&sc, &cfg).unwrap();
        assert!(outcome.decisions.values().all(|d| *d == Some(1)));
    }
}

#[test]
fn min_uid_trusted_node_leads() {
    // Two trusted nodes on K4: "a" has the smaller UID and leads; "b"
    // decides a's value.
    let g = fixtures::k4();
    let m = FaultModel::threshold(1).with_trusted([nid("a"), nid("b")]);
    let cfg = AgreementConfig::trusted_leader(set(&["a", "b"]));
    let mut inputs = uniform_inputs(&g, 0);
    inputs.insert(nid("a"), 1);
    let sc = scenario(&g, &m, NodeSet::new(), inputs, "silent");
    let (outcome, _) = run_trusted_leader(&sc, &cfg).unwrap();
    assert!(outcome.decisions.values().all(|d| *d == Some(1)));
}

#[test]
fn singleton_graph_leader_decides_own_input() {
    let g = Graph::new([nid("only")], []).unwrap();
    let m = FaultModel::threshold(0).with_trusted([nid("only")]);
    let cfg = AgreementConfig::trusted_leader(set(&["only"]));
    let sc = scenario(&g, &m, NodeSet::new(), uniform_inputs(&g, 1), "silent");
    let (outcome, _) = run_trusted_leader(&sc, &cfg).unwrap();
    assert_eq!(outcome.decisions[&nid("only")], Some(1));
}

#[test]
fn empty_trusted_set_is_a_configuration_error() {
    let g = fixtures::star6();
    let m = FaultModel::threshold(5).with_trusted([nid("center")]);
    let cfg = AgreementConfig::trusted_leader(NodeSet::new());
    let sc = scenario(&g, &m, NodeSet::new(), uniform_inputs(&g, 0), "silent");
    assert!(run_trusted_leader(&sc, &cfg).is_err());
}

// ---------------------------------------------------------------------------
// Trusted subgraph
// ---------------------------------------------------------------------------

#[test]
fn four_side_subgraph_carries_the_graph() {
    let g = fixtures::k43();
    let m = fixtures::k43_per_region();
    let members = set(&["d", "e", "f", "g"]);
    let cfg = AgreementConfig::trusted_subgraph(members.clone());
    let placements = m.enumerate_maximal_fault_sets(&g.node_set()).unwrap();
    for placement in placements {
        for v in [0u8, 1] {
            let sc = scenario(&g, &m, placement.clone(), uniform_inputs(&g, v), "equivocate");
            let (outcome, _) = run_trusted_subgraph(&sc, &cfg).unwrap();
            assert!(
                outcome.agreement_holds && outcome.validity_holds,
                "placement {placement:?} v={v}: {outcome:?}"
            );
            assert!(outcome.decisions.values().all(|d| *d == Some(v)));
        }
    }
}

#[test]
fn whole_graph_subgraph_reduces_to_plain_agreement() {
    let g = fixtures::k43();
    let m = fixtures::k43_per_region();
    let cfg_sub = AgreementConfig::trusted_subgraph(g.node_set());
    // Member-internal agreement runs at the model's own fault ceiling.
    let cfg_eig = AgreementConfig::eig(2);
    for mask in [0u64, 0b1010101, 0b0011100] {
        let inputs = inputs_from_mask(&g, mask);
        let sc = scenario(&g, &m, NodeSet::new(), inputs, "silent");
        let (sub, _) = run_trusted_subgraph(&sc, &cfg_sub).unwrap();
        let (eig, _) = run_agreement(&sc, &cfg_eig).unwrap();
        assert_eq!(sub.decisions, eig.decisions, "mask {mask:b}");
    }
}

#[test]
fn subgraph_without_honest_majority_is_rejected() {
    let g = fixtures::k43();
    let m = FaultModel::threshold(2);
    // Two of three members may fault: no strict honest majority.
    let cfg = AgreementConfig::trusted_subgraph(set(&["a", "b", "c"]));
    let sc = scenario(&g, &m, NodeSet::new(), uniform_inputs(&g, 0), "silent");
    assert!(run_trusted_subgraph(&sc, &cfg).is_err());
}

/// A member that behaves honestly through the internal agreement and
/// equivocates only its broadcast: outsiders still take the honest majority.
struct BroadcastEquivocator {
    replica: Box<dyn Process>,
    node: NodeIdx,
    broadcast_session: u64,
    names: Vec<NodeId>,
    fed_through: usize,
}

impl Adversary for BroadcastEquivocator {
    fn on_round(
        &mut self,
        round: usize,
        ctx: &SimCtx,
    ) -> weakcut_core::Result<Vec<SimEnvelope>> {
        while self.fed_through + 1 < round {
            let r = self.fed_through + 1;
            let inbox = ctx.delivered_to(r, self.node);
            self.replica.receive(r, &inbox).map_err(|e| {
                weakcut_core::Error::Config(format!("replica receive: {e}"))
            })?;
            self.fed_through = r;
        }
        let sends = self
            .replica
            .send(round)
            .map_err(|e| weakcut_core::Error::Config(format!("replica send: {e}")))?;
        Ok(sends
            .into_iter()
            .map(|(to, payload)| {
                let payload = match PathMessage::decode(&self.names, &payload) {
                    Ok(mut pm)
                        if pm.session == self.broadcast_session
                            && pm.header.len() == 1
                            && self.names[to] > self.names[self.node] =>
                    {
                        for b in pm.body.iter_mut() {
                            *b = !*b & 1;
                        }
                        pm.encode(&self.names).expect("encodes")
                    }
                    _ => payload,
                };
                SimEnvelope {
                    from: self.node,
                    to,
                    payload,
                }
            })
            .collect())
    }
}

#[test]
fn member_equivocating_only_its_broadcast_is_outvoted() {
    // Complete graph on five nodes; members m1..m3, outsiders o1, o2. One
    // fault anywhere; m3 takes it but lies only in the broadcast stage, so
    // the internal agreement is clean and outsiders see two honest copies
    // against one inconsistent (hence discarded) lie.
    let names = ["m1", "m2", "m3", "o1", "o2"];
    let mut edges = Vec::new();
    for i in 0..names.len() {
        for j in (i + 1)..names.len() {
            edges.push((nid(names[i]), nid(names[j])));
        }
    }
    let g = Graph::new(names.map(nid), edges).unwrap();
    let m = FaultModel::threshold(1);
    let members = set(&["m1", "m2", "m3"]);
    let cfg = AgreementConfig::trusted_subgraph(members);
    let mut inputs = uniform_inputs(&g, 1);
    inputs.insert(nid("o1"), 0);
    let sc = scenario(&g, &m, set(&["m3"]), inputs, "silent");

    // f_m = 1, so internal phases are sessions 1..=2 and the broadcast is 3.
    let env = ProtocolEnv {
        graph: &sc.graph,
        fault_model: &sc.fault_model,
        inputs: &sc.inputs,
    };
    let protocol: Arc<dyn ProtocolSpec> = Arc::new(AgreementProtocol { cfg: cfg.clone() });
    let replica = protocol.build(g.idx(&nid("m3")).unwrap(), &env).unwrap();
    let adversary = Box::new(BroadcastEquivocator {
        replica,
        node: g.idx(&nid("m3")).unwrap(),
        broadcast_session: 3,
        names: g.nodes().to_vec(),
        fed_through: 0,
    });
    let t = sim::run_with_adversary(&sc, &protocol, None, adversary).unwrap();
    let outcome = weakcut_core::agreement::extract_outcome(&sc, &t);
    assert!(outcome.agreement_holds, "{outcome:?}");
    // Honest members entered with 1 and m3 behaved honestly internally.
    assert!(outcome.decisions.values().all(|d| *d == Some(1)));
}

// ---------------------------------------------------------------------------
// Unknown-topology agreement
// ---------------------------------------------------------------------------

#[test]
fn unknown_topology_agreement_with_adjacency_liar() {
    let g = fixtures::unknown_graph8();
    let m = FaultModel::threshold(1);
    let cfg = AgreementConfig::eig(1).unknown_graph();
    for byz in ["red", "blue", "top"] {
        for v in [0u8, 1] {
            let sc = scenario(&g, &m, set(&[byz]), uniform_inputs(&g, v), "adjacency-lie");
            let (outcome, _) = run_agreement(&sc, &cfg).unwrap();
            assert!(
                outcome.agreement_holds && outcome.validity_holds,
                "byz {byz} v={v}: {outcome:?}"
            );
        }
    }
}

#[test]
fn outcome_flags_follow_their_definitions() {
    let g = fixtures::k4();
    let m = FaultModel::threshold(1);
    // Mixed honest inputs: validity is vacuous.
    let sc = scenario(&g, &m, set(&["d"]), inputs_from_mask(&g, 0b0001), "silent");
    let (outcome, _) = run_agreement(&sc, &AgreementConfig::eig(1)).unwrap();
    assert!(outcome.validity_holds);
    assert!(outcome.agreement_holds);
    assert_eq!(outcome.decisions.len(), 3);
}
