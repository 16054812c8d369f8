//! Batch front end: the checker command, single simulations, placement
//! sweeps, and the impossibility demo, all returning machine-readable JSON
//! reports plus a process exit code.
//!
//! Exit code contract: 0 success, 1 input or resource error, 2 a violation
//! was found or demonstrated (checker violation, or a run that failed
//! agreement/validity outside demo mode), 3 expected-failure demo succeeded.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary::{self, run_chain};
use crate::agreement::{run_agreement, AgreementConfig, AgreementOutcome};
use crate::cut_check::{
    check_weak_cut_property, classical_condition_holds, majority_condition_holds, CutVerdict,
};
use crate::error::{Error, Result};
use crate::fault::FaultModel;
use crate::flood::{DecodeOutcome, GraphKnowledge, SingleSendProtocol};
use crate::graph::{Graph, NodeId, NodeSet};
use crate::sim::{AdversarySpec, InputValue, Scenario, Transcript};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_EXPECTED_FAILURE: i32 = 3;

/// Default cap on the number of runs a sweep may expand to.
pub const DEFAULT_MAX_RUNS: usize = 1_000_000;

fn error_value(e: &Error) -> serde_json::Value {
    serde_json::json!({ "error": e.to_string() })
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub verdict: CutVerdict,
    pub majority_condition: bool,
    pub classical_condition: bool,
    /// The fault count the classical condition was evaluated at: the largest
    /// simultaneous fault set the model permits.
    pub f_used: usize,
    pub connectivity: usize,
}

pub fn check(graph: &Graph, model: &FaultModel) -> Result<CheckReport> {
    let verdict = check_weak_cut_property(graph, model)?;
    let f_used = model
        .enumerate_maximal_fault_sets(&graph.node_set())?
        .iter()
        .map(|s| s.len())
        .max()
        .unwrap_or(0);
    Ok(CheckReport {
        majority_condition: majority_condition_holds(graph, model)?,
        classical_condition: classical_condition_holds(graph, f_used)?,
        f_used,
        connectivity: graph.connectivity()?,
        verdict,
    })
}

/// The `check` command on raw file contents.
pub fn cmd_check(graph_json: &str, model_json: &str) -> (i32, serde_json::Value) {
    let parsed = Graph::from_json(graph_json)
        .and_then(|g| Ok((g, FaultModel::from_json(model_json)?)));
    let (graph, model) = match parsed {
        Ok(p) => p,
        Err(e) => return (EXIT_INPUT, error_value(&e)),
    };
    match check(&graph, &model) {
        Ok(report) => {
            let code = if report.verdict.is_pass() {
                EXIT_OK
            } else {
                EXIT_VIOLATION
            };
            (code, serde_json::to_value(&report).expect("report serializes"))
        }
        Err(e) => (EXIT_INPUT, error_value(&e)),
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    #[serde(flatten)]
    pub agreement: AgreementConfig,
    /// Demo mode: a failing run is the expected outcome.
    #[serde(default)]
    pub expect_failure: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub scenario_digest: String,
    pub outcome: AgreementOutcome,
    pub rounds_executed: usize,
    pub transcript: serde_json::Value,
}

pub fn simulate(sc: &Scenario, cfg: &AgreementConfig) -> Result<(SimulateReport, Transcript)> {
    let (outcome, transcript) = run_agreement(sc, cfg)?;
    Ok((
        SimulateReport {
            scenario_digest: sc.digest(),
            outcome,
            rounds_executed: transcript.rounds.len(),
            transcript: transcript.to_json(),
        },
        transcript,
    ))
}

pub fn cmd_simulate(scenario_json: &str, config_json: &str) -> (i32, serde_json::Value) {
    let config: SimulateConfig = match serde_json::from_str(config_json) {
        Ok(c) => c,
        Err(e) => {
            return (
                EXIT_INPUT,
                error_value(&Error::Config(format!("config parse error: {e}"))),
            )
        }
    };
    let scenario = match Scenario::from_json(scenario_json) {
        Ok(s) => s,
        Err(e) => return (EXIT_INPUT, error_value(&e)),
    };
    match simulate(&scenario, &config.agreement) {
        Ok((report, _)) => {
            let success = report.outcome.agreement_holds && report.outcome.validity_holds;
            let code = if success {
                EXIT_OK
            } else if config.expect_failure {
                EXIT_EXPECTED_FAILURE
            } else {
                EXIT_VIOLATION
            };
            (code, serde_json::to_value(&report).expect("report serializes"))
        }
        Err(e) => (EXIT_INPUT, error_value(&e)),
    }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
pub struct SweepTemplate {
    pub graph: Graph,
    pub fault_model: FaultModel,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Strategy ids to run; defaults to every sweep-applicable strategy.
    pub adversaries: Option<Vec<String>>,
    /// Keep only one input assignment of each complement pair.
    pub symmetry: bool,
    pub max_runs: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            adversaries: None,
            symmetry: false,
            max_runs: DEFAULT_MAX_RUNS,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub byzantine: Vec<NodeId>,
    pub adversary: String,
    pub inputs: BTreeMap<NodeId, InputValue>,
    pub agreement_holds: bool,
    pub validity_holds: bool,
    pub decisions: BTreeMap<NodeId, Option<InputValue>>,
    /// Digest over (rounds executed, per-round delivery counts, decisions):
    /// a stable reference to the full transcript without storing it.
    pub transcript_ref: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SweepAggregates {
    pub runs: usize,
    pub agreement_failures: usize,
    pub validity_failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub template_digest: String,
    pub config: AgreementConfig,
    /// Checker verdict and condition flags for the swept pair.
    pub check: CheckReport,
    pub placements: usize,
    pub adversaries: Vec<String>,
    pub input_assignments: usize,
    pub runs: Vec<RunRecord>,
    pub aggregates: SweepAggregates,
}

impl SweepReport {
    pub fn recompute_aggregates(&self) -> SweepAggregates {
        SweepAggregates {
            runs: self.runs.len(),
            agreement_failures: self.runs.iter().filter(|r| !r.agreement_holds).count(),
            validity_failures: self.runs.iter().filter(|r| !r.validity_holds).count(),
        }
    }
}

pub fn transcript_ref(t: &Transcript) -> String {
    let summary = serde_json::json!({
        "rounds": t.rounds.len(),
        "delivered": t.rounds.iter().map(|r| r.delivered.len()).collect::<Vec<_>>(),
        "decisions": t.decisions,
    });
    hex::encode(Sha256::digest(serde_json::to_vec(&summary).expect("summary serializes")))
}

/// Cartesian sweep: every maximal permitted fault placement, every selected
/// strategy, every binary input assignment (optionally reduced by the
/// complement symmetry). Runs execute in parallel; the report order is the
/// deterministic (placement, adversary, inputs) order regardless.
pub fn sweep(
    template: &SweepTemplate,
    cfg: &AgreementConfig,
    opts: &SweepOptions,
) -> Result<SweepReport> {
    let graph = &template.graph;
    let n = graph.node_count();
    let placements = template
        .fault_model
        .enumerate_maximal_fault_sets(&graph.node_set())?;
    let adversaries: Vec<String> = match &opts.adversaries {
        Some(list) => {
            let known = adversary::sweep_strategies();
            let mut list = list.clone();
            list.sort();
            list.dedup();
            for a in &list {
                if !known.contains(&a.as_str()) {
                    return Err(Error::Config(format!(
                        "`{a}` is not a sweep-applicable strategy (expected one of {})",
                        known.join(", ")
                    )));
                }
            }
            list
        }
        None => adversary::sweep_strategies()
            .into_iter()
            .map(String::from)
            .collect(),
    };
    let input_masks: Vec<u64> = (0u64..(1 << n))
        .filter(|m| !opts.symmetry || m & 1 == 0)
        .collect();
    let total = placements
        .len()
        .saturating_mul(adversaries.len())
        .saturating_mul(input_masks.len());
    if total > opts.max_runs {
        return Err(Error::ResourceLimit {
            what: "sweep run count",
            actual: total,
            limit: opts.max_runs,
        });
    }

    let template_digest = {
        let v = serde_json::json!({
            "graph": graph,
            "fault_model": template.fault_model,
            "seed": template.seed,
            "config": cfg,
        });
        hex::encode(Sha256::digest(serde_json::to_vec(&v).expect("serializes")))
    };

    let mut specs: Vec<(&NodeSet, &String, u64)> = Vec::with_capacity(total);
    for placement in &placements {
        for adversary in &adversaries {
            for &mask in &input_masks {
                specs.push((placement, adversary, mask));
            }
        }
    }

    let runs: Vec<RunRecord> = specs
        .par_iter()
        .map(|(placement, adversary_id, mask)| {
            let inputs: BTreeMap<NodeId, InputValue> = graph
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, name)| (name.clone(), ((mask >> i) & 1) as InputValue))
                .collect();
            let sc = Scenario {
                graph: graph.clone(),
                fault_model: template.fault_model.clone(),
                byzantine: (*placement).clone(),
                inputs: inputs.clone(),
                adversary: AdversarySpec::named(adversary_id),
                seed: template.seed,
            };
            let (outcome, transcript) = run_agreement(&sc, cfg)?;
            Ok(RunRecord {
                byzantine: placement.iter().cloned().collect(),
                adversary: (*adversary_id).clone(),
                inputs,
                agreement_holds: outcome.agreement_holds,
                validity_holds: outcome.validity_holds,
                decisions: outcome.decisions,
                transcript_ref: transcript_ref(&transcript),
            })
        })
        .collect::<Result<_>>()?;

    let mut report = SweepReport {
        template_digest,
        config: cfg.clone(),
        check: check(graph, &template.fault_model)?,
        placements: placements.len(),
        adversaries,
        input_assignments: input_masks.len(),
        runs,
        aggregates: SweepAggregates::default(),
    };
    report.aggregates = report.recompute_aggregates();
    Ok(report)
}

pub fn cmd_sweep(
    template_json: &str,
    config_json: &str,
    opts: &SweepOptions,
) -> (i32, serde_json::Value) {
    let template: SweepTemplate = match serde_json::from_str(template_json) {
        Ok(t) => t,
        Err(e) => {
            return (
                EXIT_INPUT,
                error_value(&Error::Config(format!("template parse error: {e}"))),
            )
        }
    };
    let config: SimulateConfig = match serde_json::from_str(config_json) {
        Ok(c) => c,
        Err(e) => {
            return (
                EXIT_INPUT,
                error_value(&Error::Config(format!("config parse error: {e}"))),
            )
        }
    };
    match sweep(&template, &config.agreement, opts) {
        Ok(report) => {
            let failures =
                report.aggregates.agreement_failures + report.aggregates.validity_failures;
            let code = if failures == 0 {
                EXIT_OK
            } else if config.expect_failure {
                EXIT_EXPECTED_FAILURE
            } else {
                EXIT_VIOLATION
            };
            (code, serde_json::to_value(&report).expect("report serializes"))
        }
        Err(e) => (EXIT_INPUT, error_value(&e)),
    }
}

// ---------------------------------------------------------------------------
// demo-impossibility
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct DemoPhaseReport {
    pub phase: String,
    pub scenario_digest: String,
    pub transcript_digest: String,
    pub rounds_executed: usize,
    pub decisions: BTreeMap<NodeId, Option<InputValue>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub verdict: CutVerdict,
    pub u_side: NodeSet,
    pub v_side: NodeSet,
    pub phases: Vec<DemoPhaseReport>,
    pub u_views_equal: bool,
    pub v_views_equal: bool,
    pub ambiguity_origin: NodeId,
    pub ambiguity_dest: NodeId,
    pub ambiguity_outcome: DecodeOutcome,
    pub demonstrated: bool,
}

/// Run the chain and the cross-cut ambiguity probe on a violating pair.
/// `f_protocol` bounds the information-gathering phases; it defaults to the
/// largest value the node count supports, capped by what the model permits.
pub fn demo_impossibility(
    graph: &Graph,
    model: &FaultModel,
    f_protocol: Option<usize>,
) -> Result<(DemoReport, Vec<Transcript>)> {
    let verdict = check_weak_cut_property(graph, model)?;
    let witness = match &verdict {
        CutVerdict::Pass => {
            return Err(Error::Config(
                "the weak cut property holds; nothing to demonstrate".into(),
            ))
        }
        CutVerdict::Violation { witness } => witness.clone(),
    };
    let n = graph.node_count();
    let f = f_protocol.unwrap_or_else(|| {
        let permitted = model
            .enumerate_maximal_fault_sets(&graph.node_set())
            .map(|sets| sets.iter().map(|s| s.len()).max().unwrap_or(0))
            .unwrap_or(0);
        permitted.min(n.saturating_sub(1) / 3)
    });
    let protocol: std::sync::Arc<dyn crate::sim::ProtocolSpec> =
        std::sync::Arc::new(crate::agreement::AgreementProtocol {
            cfg: AgreementConfig::eig(f),
        });
    let chain = run_chain(graph, model, &protocol)?;

    // Cross-cut probe: the faulty A side equivocates on a single relayed
    // message between the separated pair.
    let (origin, dest) = witness.cut.separated_witness.clone();
    let probe_protocol: std::sync::Arc<dyn crate::sim::ProtocolSpec> =
        std::sync::Arc::new(SingleSendProtocol {
            origin: origin.clone(),
            dest: dest.clone(),
            body: vec![0x2a],
            session: 1,
            knowledge: GraphKnowledge::Known,
        });
    let probe_sc = Scenario {
        graph: graph.clone(),
        fault_model: model.clone(),
        byzantine: witness.part_a.clone(),
        inputs: graph.nodes().iter().map(|n| (n.clone(), 0)).collect(),
        adversary: AdversarySpec::named("equivocate"),
        seed: 0,
    };
    let probe_t = crate::sim::run(&probe_sc, &probe_protocol, None)?;
    let dest_idx = graph.idx(&dest)?;
    let ambiguity_outcome = probe_t
        .rounds
        .iter()
        .rev()
        .flat_map(|r| r.decodes.iter())
        .find(|d| d.node == dest_idx)
        .map(|d| d.outcome.clone())
        .unwrap_or(DecodeOutcome::NoMessage);

    let phase_names = ["all-zero", "mixed", "all-one"];
    let chain_scenarios: Vec<Scenario> = crate::adversary::ChainPhase::ALL
        .iter()
        .map(|&ph| {
            crate::adversary::ReplayChain::from_violation(graph, model)
                .map(|c| c.scenario(ph))
        })
        .collect::<Result<_>>()?;
    let phases: Vec<DemoPhaseReport> = chain
        .transcripts
        .iter()
        .zip(phase_names.iter())
        .zip(chain_scenarios.iter())
        .map(|((t, name), sc)| DemoPhaseReport {
            phase: (*name).to_string(),
            scenario_digest: sc.digest(),
            transcript_digest: hex::encode(Sha256::digest(t.canonical_bytes())),
            rounds_executed: t.rounds.len(),
            decisions: t.decision_map().into_iter().map(|(k, v)| (k, Some(v))).collect(),
        })
        .collect();

    let demonstrated = chain.u_views_equal
        && chain.v_views_equal
        && matches!(ambiguity_outcome, DecodeOutcome::Ambiguous { .. });
    Ok((
        DemoReport {
            verdict,
            u_side: chain.u_side,
            v_side: chain.v_side,
            phases,
            u_views_equal: chain.u_views_equal,
            v_views_equal: chain.v_views_equal,
            ambiguity_origin: origin,
            ambiguity_dest: dest,
            ambiguity_outcome,
            demonstrated,
        },
        chain.transcripts,
    ))
}

pub fn cmd_demo_impossibility(
    graph_json: &str,
    model_json: &str,
    f_protocol: Option<usize>,
) -> (i32, serde_json::Value, Vec<Transcript>) {
    let parsed = Graph::from_json(graph_json)
        .and_then(|g| Ok((g, FaultModel::from_json(model_json)?)));
    let (graph, model) = match parsed {
        Ok(p) => p,
        Err(e) => return (EXIT_INPUT, error_value(&e), Vec::new()),
    };
    match demo_impossibility(&graph, &model, f_protocol) {
        Ok((report, transcripts)) => {
            let code = if report.demonstrated {
                EXIT_EXPECTED_FAILURE
            } else {
                EXIT_VIOLATION
            };
            (
                code,
                serde_json::to_value(&report).expect("report serializes"),
                transcripts,
            )
        }
        Err(e) => (EXIT_INPUT, error_value(&e), Vec::new()),
    }
}
