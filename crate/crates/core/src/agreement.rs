//! Top-level agreement: a virtual complete graph is simulated by running one
//! relay send/decode per ordered node pair inside a fixed window of physical
//! rounds, and classical exponential information gathering (f+1 phases,
//! recursive majority resolve, default 0) runs on top. Trusted-node variants:
//! a known-trusted leader broadcasts its value, or a designated subgraph
//! agrees internally and broadcasts, with outsiders taking the majority.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fault::FaultModel;
use crate::flood::{
    decode_known_indexed, decode_unknown_indexed, session_window, DecodeOutcome, GraphKnowledge,
    RelayCore,
};
use crate::graph::{Graph, NodeId, NodeSet};
use crate::sim::{
    self, InputValue, NodeEvent, NodeIdx, Process, ProtocolEnv, ProtocolSpec, Scenario,
    SimEnvelope, Transcript,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementMode {
    EigOverFlood,
    TrustedLeader,
    TrustedSubgraph,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementConfig {
    pub mode: AgreementMode,
    /// Fault bound for the information-gathering phases (eig mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<usize>,
    /// Trusted leader candidates, or the designated subgraph members.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trusted: Option<NodeSet>,
    #[serde(default)]
    pub graph_knowledge: GraphKnowledge,
}

impl AgreementConfig {
    pub fn eig(f: usize) -> Self {
        AgreementConfig {
            mode: AgreementMode::EigOverFlood,
            f: Some(f),
            trusted: None,
            graph_knowledge: GraphKnowledge::Known,
        }
    }

    pub fn trusted_leader(trusted: NodeSet) -> Self {
        AgreementConfig {
            mode: AgreementMode::TrustedLeader,
            f: None,
            trusted: Some(trusted),
            graph_knowledge: GraphKnowledge::Known,
        }
    }

    pub fn trusted_subgraph(members: NodeSet) -> Self {
        AgreementConfig {
            mode: AgreementMode::TrustedSubgraph,
            f: None,
            trusted: Some(members),
            graph_knowledge: GraphKnowledge::Known,
        }
    }

    pub fn unknown_graph(mut self) -> Self {
        self.graph_knowledge = GraphKnowledge::Unknown;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementOutcome {
    /// Honest nodes only; `None` marks a node that never decided.
    pub decisions: BTreeMap<NodeId, Option<InputValue>>,
    pub agreement_holds: bool,
    pub validity_holds: bool,
}

/// How many simultaneous faults the model can place inside `members`.
fn max_faults_within(model: &FaultModel, universe: &NodeSet, members: &NodeSet) -> Result<usize> {
    Ok(model
        .enumerate_maximal_fault_sets(universe)?
        .iter()
        .map(|f| f.intersection(members).count())
        .max()
        .unwrap_or(0))
}

/// Validate a config against a topology and model; returns the number of
/// scheduler windows the run needs.
fn validate_config(cfg: &AgreementConfig, graph: &Graph, model: &FaultModel) -> Result<usize> {
    let n = graph.node_count();
    match cfg.mode {
        AgreementMode::EigOverFlood => {
            let f = cfg
                .f
                .ok_or_else(|| Error::Config("eig_over_flood requires `f`".into()))?;
            if 3 * f >= n {
                return Err(Error::Config(format!(
                    "eig_over_flood requires 3f < n, got f={f}, n={n}"
                )));
            }
            Ok(f + 1)
        }
        AgreementMode::TrustedLeader => {
            let trusted = cfg
                .trusted
                .as_ref()
                .filter(|t| !t.is_empty())
                .ok_or_else(|| {
                    Error::Config("trusted_leader requires a nonempty trusted set".into())
                })?;
            for t in trusted {
                if !graph.contains(t) {
                    return Err(Error::Config(format!("trusted node `{t}` not in graph")));
                }
                if !model.trusted.contains(t) {
                    return Err(Error::Config(format!(
                        "trusted node `{t}` is not trusted by the fault model"
                    )));
                }
            }
            Ok(1)
        }
        AgreementMode::TrustedSubgraph => {
            let members = cfg
                .trusted
                .as_ref()
                .filter(|t| !t.is_empty())
                .ok_or_else(|| {
                    Error::Config("trusted_subgraph requires nonempty members".into())
                })?;
            for m in members {
                if !graph.contains(m) {
                    return Err(Error::Config(format!("subgraph member `{m}` not in graph")));
                }
            }
            let f_m = max_faults_within(model, &graph.node_set(), members)?;
            if 2 * f_m >= members.len() {
                return Err(Error::Config(format!(
                    "trusted_subgraph requires a strict honest majority: up to {f_m} of {} members can fault",
                    members.len()
                )));
            }
            Ok(f_m + 2)
        }
    }
}

/// Run the configured agreement protocol on a scenario.
pub fn run_agreement(
    sc: &Scenario,
    cfg: &AgreementConfig,
) -> Result<(AgreementOutcome, Transcript)> {
    sc.validate()?;
    validate_config(cfg, &sc.graph, &sc.fault_model)?;
    let protocol: Arc<dyn ProtocolSpec> = Arc::new(AgreementProtocol { cfg: cfg.clone() });
    let t = sim::run(sc, &protocol, None)?;
    let outcome = extract_outcome(sc, &t);
    Ok((outcome, t))
}

/// Leader variant; the config must select `trusted_leader`.
pub fn run_trusted_leader(
    sc: &Scenario,
    cfg: &AgreementConfig,
) -> Result<(AgreementOutcome, Transcript)> {
    if cfg.mode != AgreementMode::TrustedLeader {
        return Err(Error::Config("config mode is not trusted_leader".into()));
    }
    run_agreement(sc, cfg)
}

/// Subgraph variant; the config must select `trusted_subgraph`.
pub fn run_trusted_subgraph(
    sc: &Scenario,
    cfg: &AgreementConfig,
) -> Result<(AgreementOutcome, Transcript)> {
    if cfg.mode != AgreementMode::TrustedSubgraph {
        return Err(Error::Config("config mode is not trusted_subgraph".into()));
    }
    run_agreement(sc, cfg)
}

pub fn extract_outcome(sc: &Scenario, t: &Transcript) -> AgreementOutcome {
    let honest: Vec<&NodeId> = sc
        .graph
        .nodes()
        .iter()
        .filter(|n| !sc.byzantine.contains(n))
        .collect();
    let decisions: BTreeMap<NodeId, Option<InputValue>> = honest
        .iter()
        .map(|n| {
            let i = sc.graph.idx(n).expect("node in graph");
            ((*n).clone(), t.decisions[i])
        })
        .collect();
    let values: Vec<Option<InputValue>> = decisions.values().copied().collect();
    let agreement_holds =
        values.iter().all(|v| v.is_some()) && values.windows(2).all(|w| w[0] == w[1]);
    let honest_inputs: Vec<InputValue> = honest.iter().map(|n| sc.inputs[*n]).collect();
    let validity_holds = if honest_inputs.windows(2).all(|w| w[0] == w[1]) {
        match honest_inputs.first() {
            Some(&v) => values.iter().all(|d| *d == Some(v)),
            None => true,
        }
    } else {
        true
    };
    AgreementOutcome {
        decisions,
        agreement_holds,
        validity_holds,
    }
}

// ---------------------------------------------------------------------------
// The per-node process
// ---------------------------------------------------------------------------

pub struct AgreementProtocol {
    pub cfg: AgreementConfig,
}

impl ProtocolSpec for AgreementProtocol {
    fn build(&self, node: NodeIdx, env: &ProtocolEnv) -> Result<Box<dyn Process>> {
        let g = env.graph;
        let n = g.node_count();
        let windows = validate_config(&self.cfg, g, env.fault_model)?;
        let names = Arc::new(g.nodes().to_vec());
        let adj: Arc<Vec<u64>> = Arc::new((0..n).map(|i| g.adj_mask(i)).collect());
        let hyps: Vec<(u64, NodeSet)> = env
            .fault_model
            .enumerate_maximal_fault_sets(&g.node_set())?
            .into_iter()
            .map(|s| Ok((g.set_to_mask(&s)?, s)))
            .collect::<Result<_>>()?;
        let input = env.inputs[g.node_at(node)];
        let knowledge = self.cfg.graph_knowledge;
        let core = RelayCore::new(
            node,
            names.clone(),
            knowledge,
            match knowledge {
                GraphKnowledge::Known => Some(adj),
                GraphKnowledge::Unknown => None,
            },
            g.adj_mask(node),
        );
        let role = match self.cfg.mode {
            AgreementMode::EigOverFlood => {
                let f = self.cfg.f.expect("validated");
                let mut tree = BTreeMap::new();
                tree.insert(Vec::new(), input);
                Role::Eig {
                    f,
                    tree,
                    participants: (0..n).collect(),
                    broadcast_stage: false,
                }
            }
            AgreementMode::TrustedLeader => {
                let trusted = self.cfg.trusted.as_ref().expect("validated");
                let leader_name = trusted.iter().next().expect("nonempty");
                Role::Leader {
                    leader: g.idx(leader_name)?,
                }
            }
            AgreementMode::TrustedSubgraph => {
                let members = self.cfg.trusted.as_ref().expect("validated");
                let f_m = max_faults_within(env.fault_model, &g.node_set(), members)?;
                let member_idxs: Vec<NodeIdx> =
                    members.iter().map(|m| g.idx(m)).collect::<Result<_>>()?;
                if member_idxs.contains(&node) {
                    let mut tree = BTreeMap::new();
                    tree.insert(Vec::new(), input);
                    Role::Eig {
                        f: f_m,
                        tree,
                        participants: member_idxs,
                        broadcast_stage: true,
                    }
                } else {
                    Role::Outsider {
                        members: member_idxs,
                        broadcast_session: (f_m + 2) as u64,
                    }
                }
            }
        };
        Ok(Box::new(AgreementNode {
            core,
            names,
            n,
            input,
            window: session_window(n),
            windows,
            hyps: Arc::new(hyps),
            model: Arc::new(env.fault_model.clone()),
            role,
            internal_value: None,
            decision: None,
        }))
    }

    fn round_budget(&self, env: &ProtocolEnv) -> usize {
        let n = env.graph.node_count();
        let windows = validate_config(&self.cfg, env.graph, env.fault_model).unwrap_or(1);
        windows * session_window(n)
    }
}

enum Role {
    /// Information-gathering participant; in subgraph mode restricted to the
    /// member set and followed by a broadcast stage.
    Eig {
        f: usize,
        tree: BTreeMap<Vec<NodeIdx>, InputValue>,
        participants: Vec<NodeIdx>,
        broadcast_stage: bool,
    },
    Leader {
        leader: NodeIdx,
    },
    Outsider {
        members: Vec<NodeIdx>,
        broadcast_session: u64,
    },
}

struct AgreementNode {
    core: RelayCore,
    names: Arc<Vec<NodeId>>,
    n: usize,
    input: InputValue,
    window: usize,
    windows: usize,
    hyps: Arc<Vec<(u64, NodeSet)>>,
    model: Arc<FaultModel>,
    role: Role,
    /// Subgraph members: the internally agreed value, pending broadcast.
    internal_value: Option<InputValue>,
    decision: Option<InputValue>,
}

/// All label sequences of the given length over `participants`, excluding a
/// node, lexicographically ordered.
fn labels_excluding(participants: &[NodeIdx], len: usize, excluded: NodeIdx) -> Vec<Vec<NodeIdx>> {
    fn rec(
        participants: &[NodeIdx],
        len: usize,
        excluded: NodeIdx,
        current: &mut Vec<NodeIdx>,
        out: &mut Vec<Vec<NodeIdx>>,
    ) {
        if current.len() == len {
            out.push(current.clone());
            return;
        }
        for &p in participants {
            if p != excluded && !current.contains(&p) {
                current.push(p);
                rec(participants, len, excluded, current, out);
                current.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(participants, len, excluded, &mut Vec::with_capacity(len), &mut out);
    out
}

fn encode_entries(entries: &[(Vec<NodeIdx>, InputValue)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(entries.len() as u16).to_be_bytes());
    for (label, v) in entries {
        out.push(label.len() as u8);
        for &i in label {
            out.push(i as u8);
        }
        out.push(*v);
    }
    out
}

fn parse_entries(
    bytes: &[u8],
    expected_len: usize,
    sender: NodeIdx,
    participants: &[NodeIdx],
) -> Option<Vec<(Vec<NodeIdx>, InputValue)>> {
    if bytes.len() < 2 {
        return None;
    }
    let count = u16::from_be_bytes([bytes[0], bytes[1]]) as usize;
    let mut pos = 2;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = *bytes.get(pos)? as usize;
        pos += 1;
        let label_bytes = bytes.get(pos..pos + len)?;
        pos += len;
        let v = *bytes.get(pos)?;
        pos += 1;
        let label: Vec<NodeIdx> = label_bytes.iter().map(|&b| b as NodeIdx).collect();
        let mut ok = label.len() == expected_len && !label.contains(&sender) && v <= 1;
        if ok {
            for (i, x) in label.iter().enumerate() {
                if !participants.contains(x) || label[..i].contains(x) {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            out.push((label, v));
        }
    }
    if pos != bytes.len() {
        return None;
    }
    Some(out)
}

fn resolve(
    tree: &BTreeMap<Vec<NodeIdx>, InputValue>,
    participants: &[NodeIdx],
    f: usize,
    label: &mut Vec<NodeIdx>,
) -> InputValue {
    if label.len() == f + 1 {
        return *tree.get(label).unwrap_or(&0);
    }
    let mut ones = 0usize;
    let mut zeros = 0usize;
    for &p in participants {
        if !label.contains(&p) {
            label.push(p);
            if resolve(tree, participants, f, label) == 1 {
                ones += 1;
            } else {
                zeros += 1;
            }
            label.pop();
        }
    }
    if ones > zeros {
        1
    } else {
        0
    }
}

fn decode_at(
    core: &RelayCore,
    hyps: &[(u64, NodeSet)],
    names: &[NodeId],
    model: &FaultModel,
    origin: NodeIdx,
    session: u64,
) -> DecodeOutcome {
    let msgs = core.inbox(origin, session).to_vec();
    match core.knowledge {
        GraphKnowledge::Known => decode_known_indexed(&msgs, hyps, names),
        GraphKnowledge::Unknown => {
            decode_unknown_indexed(&msgs, hyps, names, core.me, core.my_neighbors, model)
        }
    }
}

impl Process for AgreementNode {
    fn send(&mut self, round: usize) -> std::result::Result<Vec<(NodeIdx, Vec<u8>)>, String> {
        let mut out = self.core.drain();
        let w_idx = (round - 1) / self.window;
        let offset = (round - 1) % self.window;
        if offset != 0 || w_idx >= self.windows {
            return Ok(out);
        }
        let me = self.core.me;
        match &self.role {
            Role::Eig {
                f,
                tree,
                participants,
                broadcast_stage,
            } => {
                let phases = f + 1;
                if w_idx < phases {
                    let level = w_idx;
                    let entries: Vec<(Vec<NodeIdx>, InputValue)> =
                        labels_excluding(participants, level, me)
                            .into_iter()
                            .map(|l| {
                                let v = *tree.get(&l).unwrap_or(&0);
                                (l, v)
                            })
                            .collect();
                    let payload = encode_entries(&entries);
                    let session = (w_idx + 1) as u64;
                    for &j in participants {
                        if j != me {
                            out.extend(self.core.send_new(session, j, payload.clone()));
                        }
                    }
                } else if *broadcast_stage && w_idx == phases {
                    let v = self.internal_value.unwrap_or(0);
                    let session = (phases + 1) as u64;
                    for j in 0..self.n {
                        if j != me {
                            out.extend(self.core.send_new(session, j, vec![v]));
                        }
                    }
                }
            }
            Role::Leader { leader } => {
                if me == *leader && w_idx == 0 {
                    for j in 0..self.n {
                        if j != me {
                            out.extend(self.core.send_new(1, j, vec![self.input]));
                        }
                    }
                }
            }
            Role::Outsider { .. } => {}
        }
        Ok(out)
    }

    fn receive(
        &mut self,
        round: usize,
        inbox: &[SimEnvelope],
    ) -> std::result::Result<Vec<NodeEvent>, String> {
        let mut events = Vec::new();
        for env in inbox {
            if let Some(ev) = self.core.ingest(env) {
                events.push(ev);
            }
        }
        let w_idx = (round - 1) / self.window;
        let offset = (round - 1) % self.window;
        if offset != self.window - 1 || w_idx >= self.windows {
            return Ok(events);
        }
        let me = self.core.me;
        let last_window = w_idx == self.windows - 1;
        match &mut self.role {
            Role::Eig {
                f,
                tree,
                participants,
                broadcast_stage,
            } => {
                let phases = *f + 1;
                if w_idx < phases {
                    let level = w_idx;
                    let session = (w_idx + 1) as u64;
                    for &j in participants.iter() {
                        if j == me {
                            continue;
                        }
                        let outcome =
                            decode_at(&self.core, &self.hyps, &self.names, &self.model, j, session);
                        if let DecodeOutcome::Delivered { body, .. } = &outcome {
                            if let Some(entries) = parse_entries(body, level, j, participants) {
                                for (mut label, v) in entries {
                                    label.push(j);
                                    tree.insert(label, v);
                                }
                            }
                        }
                        events.push(NodeEvent::Decode {
                            origin: j,
                            session,
                            outcome,
                        });
                    }
                    // Our own level-p contribution appends our UID.
                    for l in labels_excluding(participants, level, me) {
                        let v = *tree.get(&l).unwrap_or(&0);
                        let mut label = l;
                        label.push(me);
                        tree.insert(label, v);
                    }
                    if w_idx == phases - 1 {
                        let v = resolve(tree, participants, *f, &mut Vec::new());
                        if *broadcast_stage {
                            self.internal_value = Some(v);
                        } else {
                            self.decision = Some(v);
                        }
                    }
                } else if last_window && *broadcast_stage {
                    self.decision = Some(self.internal_value.unwrap_or(0));
                }
            }
            Role::Leader { leader } => {
                if me == *leader {
                    self.decision = Some(self.input);
                } else {
                    let outcome =
                        decode_at(&self.core, &self.hyps, &self.names, &self.model, *leader, 1);
                    match &outcome {
                        DecodeOutcome::Delivered { body, .. }
                            if body.len() == 1 && body[0] <= 1 =>
                        {
                            self.decision = Some(body[0]);
                        }
                        _ => {
                            return Err(format!("leader broadcast failed to decode: {outcome:?}"));
                        }
                    }
                    events.push(NodeEvent::Decode {
                        origin: *leader,
                        session: 1,
                        outcome,
                    });
                }
            }
            Role::Outsider {
                members,
                broadcast_session,
            } => {
                if last_window {
                    let session = *broadcast_session;
                    let mut ones = 0usize;
                    let mut zeros = 0usize;
                    for &j in members.iter() {
                        let outcome =
                            decode_at(&self.core, &self.hyps, &self.names, &self.model, j, session);
                        if let DecodeOutcome::Delivered { body, .. } = &outcome {
                            if body.len() == 1 && body[0] <= 1 {
                                if body[0] == 1 {
                                    ones += 1;
                                } else {
                                    zeros += 1;
                                }
                            }
                        }
                        events.push(NodeEvent::Decode {
                            origin: j,
                            session,
                            outcome,
                        });
                    }
                    self.decision = Some(if ones > zeros { 1 } else { 0 });
                }
            }
        }
        Ok(events)
    }

    fn decision(&self) -> Option<InputValue> {
        self.decision
    }
}
