//! The Byzantine strategy library and the executable indistinguishability
//! chain.
//!
//! Strategies have full information: they may read the whole traffic history
//! and reconstruct any honest state (honest logic is deterministic). Several
//! strategies therefore keep an honest replica of each Byzantine node and
//! rewrite its output.
//!
//! The replay chain turns a weak-cut violation witness into three coupled
//! executions. With the violated cut split into sides A and B, separating
//! components U and V: in the all-zero and all-one executions A is faulty and
//! replays its honest self from the mixed execution; in the mixed execution B
//! is faulty and equivocates, replaying its all-zero self toward U and its
//! all-one self toward everyone else. By round induction, U cannot
//! distinguish all-zero from mixed, and V cannot distinguish mixed from
//! all-one.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cut_check::{check_weak_cut_property, CutVerdict, CutWitness};
use crate::error::{Error, Result};
use crate::fault::FaultModel;
use crate::flood::{encode_wire, parse_wire};
use crate::graph::{Graph, NodeId, NodeSet};
use crate::sim::{
    Adversary, InputValue, NodeIdx, Process, ProtocolEnv, ProtocolSpec, RoundRecord, Scenario,
    SimCtx, SimEnvelope, Transcript,
};

/// Every strategy id, sorted.
pub fn library() -> Vec<&'static str> {
    vec![
        "adjacency-lie",
        "equivocate",
        "path-spoof",
        "random-bytes",
        "replay-all-one",
        "replay-all-zero",
        "replay-mixed",
        "silent",
    ]
}

/// The strategies a placement sweep can run on any scenario. The replay
/// strategies need a violation witness and fixed per-phase inputs, so they
/// are excluded here.
pub fn sweep_strategies() -> Vec<&'static str> {
    vec![
        "adjacency-lie",
        "equivocate",
        "path-spoof",
        "random-bytes",
        "silent",
    ]
}

/// Instantiate the scenario's strategy.
pub fn build(scenario: &Scenario, protocol: &Arc<dyn ProtocolSpec>) -> Result<Box<dyn Adversary>> {
    let byz: Vec<NodeIdx> = scenario
        .byzantine
        .iter()
        .map(|n| scenario.graph.idx(n))
        .collect::<Result<_>>()?;
    match scenario.adversary.strategy.as_str() {
        "silent" => Ok(Box::new(Silent)),
        "random-bytes" => Ok(Box::new(RandomBytes {
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            byz,
        })),
        "equivocate" => HonestReplica::boxed(scenario, protocol, Rewrite::Equivocate),
        "adjacency-lie" => {
            let lies = adjacency_lies(scenario)?;
            HonestReplica::boxed(scenario, protocol, Rewrite::AdjacencyLie(lies))
        }
        "path-spoof" => Ok(Box::new(PathSpoof {
            byz,
            spoofed: Default::default(),
        })),
        id @ ("replay-all-zero" | "replay-mixed" | "replay-all-one") => {
            let phase = ChainPhase::from_strategy(id).expect("matched above");
            let chain = ReplayChain::from_violation(&scenario.graph, &scenario.fault_model)?;
            chain.validate_scenario(phase, scenario)?;
            Ok(Box::new(ReplayStrategy::new(chain, phase, scenario, protocol)?))
        }
        other => Err(Error::Config(format!("unknown adversary strategy `{other}`"))),
    }
}

// ---------------------------------------------------------------------------
// Simple strategies
// ---------------------------------------------------------------------------

struct Silent;

impl Adversary for Silent {
    fn on_round(&mut self, _round: usize, _ctx: &SimCtx) -> Result<Vec<SimEnvelope>> {
        Ok(Vec::new())
    }
}

struct RandomBytes {
    rng: ChaCha8Rng,
    byz: Vec<NodeIdx>,
}

impl Adversary for RandomBytes {
    fn on_round(&mut self, _round: usize, ctx: &SimCtx) -> Result<Vec<SimEnvelope>> {
        let mut out = Vec::new();
        for &b in &self.byz {
            let mut targets = ctx.graph.adj_mask(b);
            while targets != 0 {
                let to = targets.trailing_zeros() as usize;
                targets &= targets - 1;
                let len = self.rng.gen_range(1..=24);
                let payload: Vec<u8> = (0..len).map(|_| self.rng.gen()).collect();
                out.push(SimEnvelope { from: b, to, payload });
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Honest-replica strategies: equivocate and adjacency-lie
// ---------------------------------------------------------------------------

enum Rewrite {
    /// Invert the body toward lexicographically greater neighbors.
    Equivocate,
    /// Replace the node's own attestation blocks with a lie.
    AdjacencyLie(BTreeMap<NodeIdx, u64>),
}

/// Default lie: each Byzantine node omits its lexicographically smallest
/// neighbor. Params may instead give explicit omissions/additions:
/// `{"omit": {"red": ["blue"]}, "add": {"red": ["bottom"]}}`.
fn adjacency_lies(scenario: &Scenario) -> Result<BTreeMap<NodeIdx, u64>> {
    #[derive(serde::Deserialize, Default)]
    struct Params {
        #[serde(default)]
        omit: BTreeMap<NodeId, NodeSet>,
        #[serde(default)]
        add: BTreeMap<NodeId, NodeSet>,
    }
    let params: Params = if scenario.adversary.params.is_null() {
        Params::default()
    } else {
        serde_json::from_value(scenario.adversary.params.clone())
            .map_err(|e| Error::Config(format!("adjacency-lie params: {e}")))?
    };
    let g = &scenario.graph;
    let mut lies = BTreeMap::new();
    for n in &scenario.byzantine {
        let i = g.idx(n)?;
        let truth = g.adj_mask(i);
        let mut lie = truth;
        let explicit = params.omit.contains_key(n) || params.add.contains_key(n);
        if explicit {
            if let Some(om) = params.omit.get(n) {
                lie &= !g.set_to_mask(om)?;
            }
            if let Some(ad) = params.add.get(n) {
                lie |= g.set_to_mask(ad)?;
            }
        } else if truth != 0 {
            lie &= !(1 << truth.trailing_zeros());
        }
        lies.insert(i, lie);
    }
    Ok(lies)
}

struct HonestReplica {
    replicas: BTreeMap<NodeIdx, Box<dyn Process>>,
    rewrite: Rewrite,
    names: Vec<NodeId>,
    fed_through: usize,
}

impl HonestReplica {
    fn boxed(
        scenario: &Scenario,
        protocol: &Arc<dyn ProtocolSpec>,
        rewrite: Rewrite,
    ) -> Result<Box<dyn Adversary>> {
        let env = ProtocolEnv {
            graph: &scenario.graph,
            fault_model: &scenario.fault_model,
            inputs: &scenario.inputs,
        };
        let mut replicas = BTreeMap::new();
        for n in &scenario.byzantine {
            let i = scenario.graph.idx(n)?;
            replicas.insert(i, protocol.build(i, &env)?);
        }
        Ok(Box::new(HonestReplica {
            replicas,
            rewrite,
            names: scenario.graph.nodes().to_vec(),
            fed_through: 0,
        }))
    }

    fn rewrite_payload(&self, from: NodeIdx, to: NodeIdx, payload: Vec<u8>) -> Vec<u8> {
        let Ok(mut msg) = parse_wire(&self.names, &payload) else {
            return payload;
        };
        match &self.rewrite {
            Rewrite::Equivocate => {
                if self.names[to] > self.names[from] {
                    for b in msg.body.iter_mut() {
                        *b = !*b;
                    }
                    encode_wire(&self.names, &msg)
                } else {
                    payload
                }
            }
            Rewrite::AdjacencyLie(lies) => {
                let Some(&lie) = lies.get(&from) else {
                    return payload;
                };
                if let Some(atts) = &mut msg.attest {
                    let mut changed = false;
                    for (pos, &h) in msg.header.iter().enumerate() {
                        if h == from && atts[pos] != lie {
                            atts[pos] = lie;
                            changed = true;
                        }
                    }
                    if changed {
                        return encode_wire(&self.names, &msg);
                    }
                }
                payload
            }
        }
    }
}

impl Adversary for HonestReplica {
    fn on_round(&mut self, round: usize, ctx: &SimCtx) -> Result<Vec<SimEnvelope>> {
        // Feed the replicas the deliveries they missed, then ask what an
        // honest node would send this round, and distort it.
        while self.fed_through + 1 < round {
            let r = self.fed_through + 1;
            for (&i, p) in self.replicas.iter_mut() {
                let inbox = ctx.delivered_to(r, i);
                p.receive(r, &inbox).map_err(|reason| Error::Simulation {
                    node: ctx.graph.node_at(i).to_string(),
                    round: r,
                    reason: format!("adversary replica: {reason}"),
                })?;
            }
            self.fed_through = r;
        }
        let mut raw = Vec::new();
        for (&i, p) in self.replicas.iter_mut() {
            let sends = p.send(round).map_err(|reason| Error::Simulation {
                node: ctx.graph.node_at(i).to_string(),
                round,
                reason: format!("adversary replica: {reason}"),
            })?;
            raw.extend(sends.into_iter().map(|(to, payload)| (i, to, payload)));
        }
        Ok(raw
            .into_iter()
            .map(|(from, to, payload)| SimEnvelope {
                from,
                to,
                payload: self.rewrite_payload(from, to, payload),
            })
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Path spoofing
// ---------------------------------------------------------------------------

/// Forge relay headers for every session it observes: one frame whose claimed
/// path contains a non-existent hop, and one whose final hop is not the
/// physical sender. Both are locally refutable; the node does not relay.
struct PathSpoof {
    byz: Vec<NodeIdx>,
    spoofed: std::collections::BTreeSet<(NodeIdx, u64, NodeIdx)>,
}

impl Adversary for PathSpoof {
    fn on_round(&mut self, round: usize, ctx: &SimCtx) -> Result<Vec<SimEnvelope>> {
        if round < 2 {
            return Ok(Vec::new());
        }
        let names: Vec<NodeId> = ctx.graph.nodes().to_vec();
        let n = ctx.graph.node_count();
        let prev: &RoundRecord = &ctx.history[round - 2];
        // Discover sessions from their initial single-hop frames.
        let mut sessions: Vec<crate::flood::PathSpoofTarget> = Vec::new();
        for e in &prev.delivered {
            if let Ok(msg) = parse_wire(&names, &e.payload) {
                if msg.header.len() == 1 {
                    sessions.push(crate::flood::PathSpoofTarget {
                        origin: msg.header[0],
                        session: msg.session,
                        dest: msg.dest,
                        body: msg.body.clone(),
                        attested: msg.attest.is_some(),
                    });
                }
            }
        }
        sessions.sort_by_key(|s| (s.origin, s.session));
        sessions.dedup_by_key(|s| (s.origin, s.session));
        let mut out = Vec::new();
        for s in sessions {
            for &b in &self.byz {
                if b == s.origin || !self.spoofed.insert((s.origin, s.session, b)) {
                    continue;
                }
                let flipped: Vec<u8> = s.body.iter().map(|x| !x).collect();
                // A hop the graph does not have.
                let fake_mid = (0..n).find(|&x| {
                    x != s.origin && x != b && ctx.graph.adj_mask(s.origin) & (1 << x) == 0
                });
                let mut targets = ctx.graph.adj_mask(b);
                while targets != 0 {
                    let to = targets.trailing_zeros() as usize;
                    targets &= targets - 1;
                    if let Some(mid) = fake_mid {
                        out.push(SimEnvelope {
                            from: b,
                            to,
                            payload: crate::flood::forge_frame(
                                &names,
                                s.session,
                                s.dest,
                                &[s.origin, mid, b],
                                &flipped,
                                s.attested,
                                to,
                            ),
                        });
                    }
                    // Claimed last hop differs from the physical sender.
                    if let Some(decoy) =
                        (0..n).find(|&x| x != b && ctx.graph.adj_mask(s.origin) & (1 << x) != 0)
                    {
                        out.push(SimEnvelope {
                            from: b,
                            to,
                            payload: crate::flood::forge_frame(
                                &names,
                                s.session,
                                s.dest,
                                &[s.origin, decoy],
                                &flipped,
                                s.attested,
                                to,
                            ),
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// The replay chain
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainPhase {
    AllZero,
    Mixed,
    AllOne,
}

impl ChainPhase {
    pub const ALL: [ChainPhase; 3] = [ChainPhase::AllZero, ChainPhase::Mixed, ChainPhase::AllOne];

    pub fn strategy_id(self) -> &'static str {
        match self {
            ChainPhase::AllZero => "replay-all-zero",
            ChainPhase::Mixed => "replay-mixed",
            ChainPhase::AllOne => "replay-all-one",
        }
    }

    pub fn from_strategy(s: &str) -> Option<ChainPhase> {
        match s {
            "replay-all-zero" => Some(ChainPhase::AllZero),
            "replay-mixed" => Some(ChainPhase::Mixed),
            "replay-all-one" => Some(ChainPhase::AllOne),
            _ => None,
        }
    }

    fn index(self) -> usize {
        match self {
            ChainPhase::AllZero => 0,
            ChainPhase::Mixed => 1,
            ChainPhase::AllOne => 2,
        }
    }
}

/// The three-execution construction derived from a violation witness.
#[derive(Debug, Clone)]
pub struct ReplayChain {
    pub graph: Graph,
    pub fault_model: FaultModel,
    pub witness: CutWitness,
    /// Component of the first separated node (honest in every phase).
    pub u_side: NodeSet,
    /// Component of the second separated node.
    pub v_side: NodeSet,
}

impl ReplayChain {
    /// Run the checker and build the chain; refuses graphs that pass.
    pub fn from_violation(graph: &Graph, model: &FaultModel) -> Result<Self> {
        match check_weak_cut_property(graph, model)? {
            CutVerdict::Pass => Err(Error::Config(
                "the weak cut property holds; there is no violated cut to replay".into(),
            )),
            CutVerdict::Violation { witness } => Self::from_witness(graph, model, witness),
        }
    }

    pub fn from_witness(graph: &Graph, model: &FaultModel, witness: CutWitness) -> Result<Self> {
        if !graph.is_cut(&witness.cut.members)? {
            return Err(Error::Config("witness cut does not cut the graph".into()));
        }
        if witness.part_a.is_empty()
            || witness.part_b.is_empty()
            || !model.can_all_fault(&witness.part_a)
            || !model.can_all_fault(&witness.part_b)
        {
            return Err(Error::Config("witness sides are not both fault-capable".into()));
        }
        let comps = graph.components_after_removal(&witness.cut.members)?;
        let (u, v) = &witness.cut.separated_witness;
        let u_side = comps
            .iter()
            .find(|c| c.contains(u))
            .ok_or_else(|| Error::Config("witness node missing from components".into()))?
            .clone();
        let v_side = comps
            .iter()
            .find(|c| c.contains(v))
            .ok_or_else(|| Error::Config("witness node missing from components".into()))?
            .clone();
        Ok(ReplayChain {
            graph: graph.clone(),
            fault_model: model.clone(),
            witness,
            u_side,
            v_side,
        })
    }

    /// Faulty side of a phase: A in the outer phases, B in the mixed one.
    pub fn byzantine(&self, phase: ChainPhase) -> &NodeSet {
        match phase {
            ChainPhase::AllZero | ChainPhase::AllOne => &self.witness.part_a,
            ChainPhase::Mixed => &self.witness.part_b,
        }
    }

    /// Inputs of a phase: all zero, all one, or one-everywhere except the
    /// U component.
    pub fn inputs(&self, phase: ChainPhase) -> BTreeMap<NodeId, InputValue> {
        self.graph
            .nodes()
            .iter()
            .map(|n| {
                let v = match phase {
                    ChainPhase::AllZero => 0,
                    ChainPhase::AllOne => 1,
                    ChainPhase::Mixed => {
                        if self.u_side.contains(n) {
                            0
                        } else {
                            1
                        }
                    }
                };
                (n.clone(), v)
            })
            .collect()
    }

    pub fn scenario(&self, phase: ChainPhase) -> Scenario {
        Scenario {
            graph: self.graph.clone(),
            fault_model: self.fault_model.clone(),
            byzantine: self.byzantine(phase).clone(),
            inputs: self.inputs(phase),
            adversary: crate::sim::AdversarySpec::named(phase.strategy_id()),
            seed: 0,
        }
    }

    fn validate_scenario(&self, phase: ChainPhase, sc: &Scenario) -> Result<()> {
        if sc.byzantine != *self.byzantine(phase) || sc.inputs != self.inputs(phase) {
            return Err(Error::Config(format!(
                "scenario does not match the {} phase of the derived chain",
                phase.strategy_id()
            )));
        }
        Ok(())
    }
}

/// One of the three coupled worlds.
struct World {
    processes: BTreeMap<NodeIdx, Box<dyn Process>>,
    /// The faulty envelopes this world saw in the current round.
    faulty_out: Vec<SimEnvelope>,
}

struct ReplayStrategy {
    phase_idx: usize,
    worlds: Vec<World>,
    part_a: Vec<NodeIdx>,
    part_b: Vec<NodeIdx>,
    u_mask: u64,
    names: Vec<NodeId>,
    n: usize,
    adj: Vec<u64>,
    advanced_to: usize,
}

impl ReplayStrategy {
    fn new(
        chain: ReplayChain,
        phase: ChainPhase,
        scenario: &Scenario,
        protocol: &Arc<dyn ProtocolSpec>,
    ) -> Result<Self> {
        let g = &scenario.graph;
        let mut worlds = Vec::with_capacity(3);
        for ph in ChainPhase::ALL {
            let inputs = chain.inputs(ph);
            let env = ProtocolEnv {
                graph: g,
                fault_model: &scenario.fault_model,
                inputs: &inputs,
            };
            let byz = chain.byzantine(ph);
            let mut processes = BTreeMap::new();
            for (i, name) in g.nodes().iter().enumerate() {
                if !byz.contains(name) {
                    processes.insert(i, protocol.build(i, &env)?);
                }
            }
            worlds.push(World {
                processes,
                faulty_out: Vec::new(),
            });
        }
        let to_idxs = |s: &NodeSet| -> Result<Vec<NodeIdx>> {
            s.iter().map(|n| g.idx(n)).collect()
        };
        Ok(ReplayStrategy {
            phase_idx: phase.index(),
            worlds,
            part_a: to_idxs(&chain.witness.part_a)?,
            part_b: to_idxs(&chain.witness.part_b)?,
            u_mask: g.set_to_mask(&chain.u_side)?,
            names: g.nodes().to_vec(),
            n: g.node_count(),
            adj: (0..g.node_count()).map(|i| g.adj_mask(i)).collect(),
            advanced_to: 0,
        })
    }

    fn world_sends(
        &mut self,
        world: usize,
        round: usize,
    ) -> Result<BTreeMap<NodeIdx, Vec<SimEnvelope>>> {
        let mut sends = BTreeMap::new();
        for (&i, p) in self.worlds[world].processes.iter_mut() {
            let outs = p.send(round).map_err(|reason| Error::Simulation {
                node: self.names[i].to_string(),
                round,
                reason: format!("chain world {world}: {reason}"),
            })?;
            sends.insert(
                i,
                outs.into_iter()
                    .map(|(to, payload)| SimEnvelope { from: i, to, payload })
                    .collect(),
            );
        }
        Ok(sends)
    }

    /// Advance all three worlds through one lock-step round.
    fn advance(&mut self, round: usize) -> Result<()> {
        let honest: Vec<BTreeMap<NodeIdx, Vec<SimEnvelope>>> = (0..3)
            .map(|w| self.world_sends(w, round))
            .collect::<Result<_>>()?;

        // Faulty outputs, copied from sibling worlds' honest instances.
        let mut faulty: [Vec<SimEnvelope>; 3] = Default::default();
        for &a in &self.part_a {
            if let Some(sends) = honest[1].get(&a) {
                faulty[0].extend(sends.iter().cloned());
                faulty[2].extend(sends.iter().cloned());
            }
        }
        for &b in &self.part_b {
            if let Some(sends) = honest[0].get(&b) {
                faulty[1].extend(
                    sends
                        .iter()
                        .filter(|e| self.u_mask & (1 << e.to) != 0)
                        .cloned(),
                );
            }
            if let Some(sends) = honest[2].get(&b) {
                faulty[1].extend(
                    sends
                        .iter()
                        .filter(|e| self.u_mask & (1 << e.to) == 0)
                        .cloned(),
                );
            }
        }

        for w in 0..3 {
            let mut all: Vec<SimEnvelope> = Vec::new();
            for sends in honest[w].values() {
                all.extend(sends.iter().cloned());
            }
            all.extend(faulty[w].iter().cloned());
            all.retain(|e| e.to < self.n && self.adj[e.from] & (1 << e.to) != 0);
            all.sort_unstable();
            all.dedup();
            for (&i, p) in self.worlds[w].processes.iter_mut() {
                let inbox: Vec<SimEnvelope> =
                    all.iter().filter(|e| e.to == i).cloned().collect();
                p.receive(round, &inbox).map_err(|reason| Error::Simulation {
                    node: self.names[i].to_string(),
                    round,
                    reason: format!("chain world {w}: {reason}"),
                })?;
            }
            self.worlds[w].faulty_out = faulty[w].clone();
        }
        self.advanced_to = round;
        Ok(())
    }
}

impl Adversary for ReplayStrategy {
    fn on_round(&mut self, round: usize, _ctx: &SimCtx) -> Result<Vec<SimEnvelope>> {
        while self.advanced_to < round {
            let r = self.advanced_to + 1;
            self.advance(r)?;
        }
        Ok(self.worlds[self.phase_idx].faulty_out.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agreement::{AgreementConfig, AgreementProtocol};
    use crate::fixtures;
    use crate::sim::AdversarySpec;
    use std::collections::BTreeMap;

    #[test]
    fn library_lists_every_strategy() {
        assert_eq!(
            library(),
            vec![
                "adjacency-lie",
                "equivocate",
                "path-spoof",
                "random-bytes",
                "replay-all-one",
                "replay-all-zero",
                "replay-mixed",
                "silent",
            ]
        );
        for s in sweep_strategies() {
            assert!(library().contains(&s));
        }
    }

    #[test]
    fn every_sweep_strategy_builds() {
        let g = fixtures::k43();
        let inputs: BTreeMap<_, _> = g.nodes().iter().map(|n| (n.clone(), 0u8)).collect();
        let protocol: Arc<dyn crate::sim::ProtocolSpec> = Arc::new(AgreementProtocol {
            cfg: AgreementConfig::eig(2),
        });
        for s in sweep_strategies() {
            let sc = Scenario {
                graph: g.clone(),
                fault_model: fixtures::k43_per_region(),
                byzantine: [NodeId::from("a")].into_iter().collect(),
                inputs: inputs.clone(),
                adversary: AdversarySpec::named(s),
                seed: 1,
            };
            assert!(build(&sc, &protocol).is_ok(), "{s}");
        }
        let sc = Scenario {
            graph: g.clone(),
            fault_model: fixtures::k43_per_region(),
            byzantine: [NodeId::from("a")].into_iter().collect(),
            inputs,
            adversary: AdversarySpec::named("no-such-strategy"),
            seed: 1,
        };
        assert!(build(&sc, &protocol).is_err());
    }
}

/// Outcome of running all three phases side by side.
#[derive(Debug)]
pub struct ChainReport {
    pub witness: CutWitness,
    pub u_side: NodeSet,
    pub v_side: NodeSet,
    pub transcripts: Vec<Transcript>,
    /// U's view of all-zero equals its view of mixed, byte for byte.
    pub u_views_equal: bool,
    /// V's view of mixed equals its view of all-one, byte for byte.
    pub v_views_equal: bool,
}

/// Build the chain from a violation and run all three phases.
pub fn run_chain(
    graph: &Graph,
    model: &FaultModel,
    protocol: &Arc<dyn ProtocolSpec>,
) -> Result<ChainReport> {
    let chain = ReplayChain::from_violation(graph, model)?;
    let mut transcripts = Vec::with_capacity(3);
    for phase in ChainPhase::ALL {
        let sc = chain.scenario(phase);
        transcripts.push(crate::sim::run(&sc, protocol, None)?);
    }
    let u_views_equal = transcripts[0].projection_bytes(&chain.u_side)
        == transcripts[1].projection_bytes(&chain.u_side);
    let v_views_equal = transcripts[1].projection_bytes(&chain.v_side)
        == transcripts[2].projection_bytes(&chain.v_side);
    Ok(ChainReport {
        witness: chain.witness.clone(),
        u_side: chain.u_side.clone(),
        v_side: chain.v_side.clone(),
        transcripts,
        u_views_equal,
        v_views_equal,
    })
}
