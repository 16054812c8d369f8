//! Deterministic lock-step round simulator.
//!
//! Each round: (1) honest processes and the adversary emit envelopes as a
//! function of their state after the previous round, (2) envelopes not along
//! a graph edge (or with a forged honest sender) are dropped, (3) the rest
//! are delivered simultaneously. Identical scenarios, including the seed,
//! produce byte-identical transcripts.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary;
use crate::error::{Error, Result};
use crate::fault::FaultModel;
use crate::flood::DecodeOutcome;
use crate::graph::{Graph, NodeId, NodeSet};

/// Index into a graph's sorted node table.
pub type NodeIdx = usize;

/// Agreement inputs and decisions are binary.
pub type InputValue = u8;

/// A message in flight. `from`/`to` are node-table indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SimEnvelope {
    pub from: NodeIdx,
    pub to: NodeIdx,
    pub payload: Vec<u8>,
}

/// Adversary selection: a strategy id plus free-form parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarySpec {
    pub strategy: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl AdversarySpec {
    pub fn named(strategy: &str) -> Self {
        AdversarySpec {
            strategy: strategy.to_string(),
            params: serde_json::Value::Null,
        }
    }
}

/// One complete experiment setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub graph: Graph,
    pub fault_model: FaultModel,
    pub byzantine: NodeSet,
    pub inputs: BTreeMap<NodeId, InputValue>,
    pub adversary: AdversarySpec,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !self.fault_model.is_valid(&self.byzantine) {
            return Err(Error::ScenarioParse(format!(
                "byzantine set {:?} is not a permitted fault set",
                self.byzantine.iter().map(|n| n.as_str()).collect::<Vec<_>>()
            )));
        }
        for n in &self.byzantine {
            if !self.graph.contains(n) {
                return Err(Error::ScenarioParse(format!("byzantine node `{n}` not in graph")));
            }
        }
        for n in self.graph.nodes() {
            match self.inputs.get(n) {
                None => {
                    return Err(Error::ScenarioParse(format!("node `{n}` has no input")));
                }
                Some(v) if *v > 1 => {
                    return Err(Error::ScenarioParse(format!(
                        "input for `{n}` must be 0 or 1, got {v}"
                    )));
                }
                _ => {}
            }
        }
        for n in self.inputs.keys() {
            if !self.graph.contains(n) {
                return Err(Error::ScenarioParse(format!("input for unknown node `{n}`")));
            }
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let sc: Scenario =
            serde_json::from_str(json).map_err(|e| Error::ScenarioParse(e.to_string()))?;
        Ok(sc)
    }

    /// Stable hash of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn byzantine_mask(&self) -> u64 {
        self.graph
            .set_to_mask(&self.byzantine)
            .expect("validated byzantine set")
    }
}

/// Why a receiver threw a message away.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    Malformed,
    UnknownUid,
    DuplicateUid,
    LastHopNotSender,
    NonAdjacentHops,
    SelfInHeader,
    OriginIsDest,
    AttestationMissing,
    AttestationDenies,
    DuplicateDelivery,
}

/// Observable effects a process reports back to the engine for the record.
#[derive(Debug, Clone)]
pub enum NodeEvent {
    Discard {
        from: NodeIdx,
        reason: DiscardReason,
        payload: Vec<u8>,
    },
    Decode {
        origin: NodeIdx,
        session: u64,
        outcome: DecodeOutcome,
    },
}

#[derive(Debug, Clone)]
pub struct DiscardRecord {
    pub at: NodeIdx,
    pub from: NodeIdx,
    pub reason: DiscardReason,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct DecodeRecord {
    pub node: NodeIdx,
    pub origin: NodeIdx,
    pub session: u64,
    pub outcome: DecodeOutcome,
}

/// Everything that happened in one round.
#[derive(Debug, Clone, Default)]
pub struct RoundRecord {
    pub delivered: Vec<SimEnvelope>,
    /// Envelopes dropped by the engine (off-edge or forged sender).
    pub dropped: Vec<SimEnvelope>,
    pub discards: Vec<DiscardRecord>,
    pub decodes: Vec<DecodeRecord>,
}

/// Full record of a run.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub node_names: Vec<NodeId>,
    pub byzantine_mask: u64,
    pub rounds: Vec<RoundRecord>,
    /// Indexed by node; `None` for undecided or Byzantine nodes.
    pub decisions: Vec<Option<InputValue>>,
}

impl Transcript {
    fn envelope_json(&self, e: &SimEnvelope) -> serde_json::Value {
        serde_json::json!({
            "from": self.node_names[e.from],
            "to": self.node_names[e.to],
            "payload": hex::encode(&e.payload),
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rounds: Vec<serde_json::Value> = self
            .rounds
            .iter()
            .enumerate()
            .map(|(i, r)| {
                serde_json::json!({
                    "round": i + 1,
                    "delivered": r.delivered.iter().map(|e| self.envelope_json(e)).collect::<Vec<_>>(),
                    "dropped": r.dropped.iter().map(|e| self.envelope_json(e)).collect::<Vec<_>>(),
                    "discards": r.discards.iter().map(|d| serde_json::json!({
                        "at": self.node_names[d.at],
                        "from": self.node_names[d.from],
                        "reason": d.reason,
                        "payload": hex::encode(&d.payload),
                    })).collect::<Vec<_>>(),
                    "decodes": r.decodes.iter().map(|d| serde_json::json!({
                        "node": self.node_names[d.node],
                        "origin": self.node_names[d.origin],
                        "session": d.session,
                        "outcome": d.outcome,
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        let decisions: BTreeMap<String, serde_json::Value> = self
            .node_names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                (
                    n.to_string(),
                    match self.decisions[i] {
                        Some(v) => serde_json::json!(v),
                        None => serde_json::Value::Null,
                    },
                )
            })
            .collect();
        serde_json::json!({ "rounds": rounds, "decisions": decisions })
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.to_json()).expect("transcript serializes")
    }

    /// The run as seen by a set of nodes: deliveries to them plus their
    /// decisions, serialized canonically. Used for side-by-side execution
    /// comparisons.
    pub fn projection_bytes(&self, nodes: &NodeSet) -> Vec<u8> {
        let idxs: Vec<usize> = self
            .node_names
            .iter()
            .enumerate()
            .filter(|(_, n)| nodes.contains(n))
            .map(|(i, _)| i)
            .collect();
        let rounds: Vec<serde_json::Value> = self
            .rounds
            .iter()
            .enumerate()
            .map(|(i, r)| {
                serde_json::json!({
                    "round": i + 1,
                    "delivered": r
                        .delivered
                        .iter()
                        .filter(|e| idxs.contains(&e.to))
                        .map(|e| self.envelope_json(e))
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
        let decisions: BTreeMap<String, serde_json::Value> = idxs
            .iter()
            .map(|&i| {
                (
                    self.node_names[i].to_string(),
                    match self.decisions[i] {
                        Some(v) => serde_json::json!(v),
                        None => serde_json::Value::Null,
                    },
                )
            })
            .collect();
        serde_json::to_vec(&serde_json::json!({ "rounds": rounds, "decisions": decisions }))
            .expect("projection serializes")
    }

    /// Decisions keyed by node name, omitting undecided/Byzantine nodes.
    pub fn decision_map(&self) -> BTreeMap<NodeId, InputValue> {
        self.node_names
            .iter()
            .enumerate()
            .filter_map(|(i, n)| self.decisions[i].map(|v| (n.clone(), v)))
            .collect()
    }
}

/// Per-node protocol logic hosted by the engine. Outgoing envelopes in round
/// r are a function of state after round r-1; deliveries of round r update
/// state afterwards.
pub trait Process {
    fn send(&mut self, round: usize) -> std::result::Result<Vec<(NodeIdx, Vec<u8>)>, String>;
    fn receive(
        &mut self,
        round: usize,
        inbox: &[SimEnvelope],
    ) -> std::result::Result<Vec<NodeEvent>, String>;
    fn decision(&self) -> Option<InputValue>;
}

/// Context handed to protocol factories.
pub struct ProtocolEnv<'a> {
    pub graph: &'a Graph,
    pub fault_model: &'a FaultModel,
    pub inputs: &'a BTreeMap<NodeId, InputValue>,
}

/// Factory for the honest per-node logic, plus the run length it needs.
pub trait ProtocolSpec: Send + Sync {
    fn build(&self, node: NodeIdx, env: &ProtocolEnv) -> Result<Box<dyn Process>>;
    fn round_budget(&self, env: &ProtocolEnv) -> usize;
}

/// Full-information view the adversary gets each round.
pub struct SimCtx<'a> {
    pub graph: &'a Graph,
    pub scenario: &'a Scenario,
    pub byzantine_mask: u64,
    pub history: &'a [RoundRecord],
}

impl SimCtx<'_> {
    /// Deliveries to `node` in a given past round (1-based).
    pub fn delivered_to(&self, round: usize, node: NodeIdx) -> Vec<SimEnvelope> {
        match self.history.get(round.wrapping_sub(1)) {
            Some(r) => r
                .delivered
                .iter()
                .filter(|e| e.to == node)
                .cloned()
                .collect(),
            None => Vec::new(),
        }
    }
}

/// Byzantine behavior: emits arbitrary envelopes from Byzantine nodes.
pub trait Adversary {
    fn on_round(&mut self, round: usize, ctx: &SimCtx) -> Result<Vec<SimEnvelope>>;
}

/// Run a scenario with the given protocol. The budget defaults to the
/// protocol's own; `run` stops early once every honest node has decided.
pub fn run(
    scenario: &Scenario,
    protocol: &Arc<dyn ProtocolSpec>,
    round_budget: Option<usize>,
) -> Result<Transcript> {
    run_with(scenario, protocol, round_budget, None)
}

/// As [`run`], but with a caller-supplied Byzantine behavior instead of the
/// scenario's registered strategy id.
pub fn run_with_adversary(
    scenario: &Scenario,
    protocol: &Arc<dyn ProtocolSpec>,
    round_budget: Option<usize>,
    adversary: Box<dyn Adversary>,
) -> Result<Transcript> {
    run_with(scenario, protocol, round_budget, Some(adversary))
}

fn run_with(
    scenario: &Scenario,
    protocol: &Arc<dyn ProtocolSpec>,
    round_budget: Option<usize>,
    adversary_override: Option<Box<dyn Adversary>>,
) -> Result<Transcript> {
    scenario.validate()?;
    let graph = &scenario.graph;
    let n = graph.node_count();
    let env = ProtocolEnv {
        graph,
        fault_model: &scenario.fault_model,
        inputs: &scenario.inputs,
    };
    let budget = round_budget.unwrap_or_else(|| protocol.round_budget(&env));
    if budget < 1 {
        return Err(Error::Config("round budget must be at least 1".into()));
    }
    let byz_mask = scenario.byzantine_mask();

    let mut processes: BTreeMap<NodeIdx, Box<dyn Process>> = BTreeMap::new();
    for i in 0..n {
        if byz_mask & (1 << i) == 0 {
            processes.insert(i, protocol.build(i, &env)?);
        }
    }
    let mut adversary = match adversary_override {
        Some(a) => a,
        None => adversary::build(scenario, protocol)?,
    };

    let mut history: Vec<RoundRecord> = Vec::new();
    for round in 1..=budget {
        let mut outgoing: Vec<SimEnvelope> = Vec::new();
        for (&i, p) in processes.iter_mut() {
            let sends = p.send(round).map_err(|reason| Error::Simulation {
                node: graph.node_at(i).to_string(),
                round,
                reason,
            })?;
            outgoing.extend(sends.into_iter().map(|(to, payload)| SimEnvelope {
                from: i,
                to,
                payload,
            }));
        }
        let mut dropped = Vec::new();
        {
            let ctx = SimCtx {
                graph,
                scenario,
                byzantine_mask: byz_mask,
                history: &history,
            };
            // A Byzantine node cannot impersonate an honest sender; links are
            // authenticated.
            for e in adversary.on_round(round, &ctx)? {
                if e.from < n && byz_mask & (1 << e.from) != 0 {
                    outgoing.push(e);
                } else {
                    dropped.push(e);
                }
            }
        }
        outgoing.sort_unstable();
        outgoing.dedup();

        let mut delivered = Vec::with_capacity(outgoing.len());
        for e in outgoing {
            let on_edge = e.from < n && e.to < n && graph.adj_mask(e.from) & (1 << e.to) != 0;
            if on_edge {
                delivered.push(e);
            } else {
                dropped.push(e);
            }
        }
        dropped.sort_unstable();

        let mut record = RoundRecord {
            delivered,
            dropped,
            ..Default::default()
        };
        for (&i, p) in processes.iter_mut() {
            let inbox: Vec<SimEnvelope> = record
                .delivered
                .iter()
                .filter(|e| e.to == i)
                .cloned()
                .collect();
            let events = p.receive(round, &inbox).map_err(|reason| Error::Simulation {
                node: graph.node_at(i).to_string(),
                round,
                reason,
            })?;
            for ev in events {
                match ev {
                    NodeEvent::Discard {
                        from,
                        reason,
                        payload,
                    } => record.discards.push(DiscardRecord {
                        at: i,
                        from,
                        reason,
                        payload,
                    }),
                    NodeEvent::Decode {
                        origin,
                        session,
                        outcome,
                    } => record.decodes.push(DecodeRecord {
                        node: i,
                        origin,
                        session,
                        outcome,
                    }),
                }
            }
        }
        history.push(record);

        if !processes.is_empty() && processes.values().all(|p| p.decision().is_some()) {
            break;
        }
    }

    let mut decisions = vec![None; n];
    for (&i, p) in processes.iter() {
        decisions[i] = p.decision();
    }
    Ok(Transcript {
        node_names: graph.nodes().to_vec(),
        byzantine_mask: byz_mask,
        rounds: history,
        decisions,
    })
}
