//! Batch front end: check feasibility, run simulations, sweep adversarial
//! placements, and demonstrate impossibility, with JSON reports on stdout.
//!
//! Exit codes: 0 success; 1 input or resource error; 2 violation found or a
//! run failed agreement/validity; 3 expected-failure demo succeeded.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use weakcut_core::harness::{self, SweepOptions, DEFAULT_MAX_RUNS, EXIT_INPUT};

#[derive(Parser)]
#[command(name = "weakcut", version, about = "Byzantine agreement feasibility on incomplete networks: checker and synchronous simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide the weak cut property for a graph under a fault model.
    Check {
        /// Graph JSON file: {"nodes": [...], "edges": [[a,b], ...]}.
        graph: PathBuf,
        /// Fault model JSON file (threshold / per_region / explicit_family).
        fault_model: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one agreement scenario under a protocol config.
    Simulate {
        /// Scenario JSON (graph, fault model, byzantine set, inputs,
        /// adversary, seed).
        scenario: PathBuf,
        /// Protocol config JSON (mode, f, trusted, graph_knowledge,
        /// expect_failure).
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep all maximal fault placements x strategies x binary inputs.
    Sweep {
        /// Template JSON: {"graph": ..., "fault_model": ..., "seed": ...}.
        template: PathBuf,
        /// Protocol config JSON, as for simulate.
        config: PathBuf,
        /// Comma-separated strategy ids (default: every sweep strategy).
        #[arg(long)]
        adversaries: Option<String>,
        /// Keep one input assignment per complement pair.
        #[arg(long)]
        symmetry: bool,
        /// Cap on the expanded run count.
        #[arg(long, default_value_t = DEFAULT_MAX_RUNS)]
        max_subsets: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the replay chain on a violating pair and demonstrate the
    /// indistinguishable executions plus the cross-cut decode ambiguity.
    DemoImpossibility {
        graph: PathBuf,
        fault_model: PathBuf,
        /// Fault bound for the agreement protocol under test (defaults to
        /// the largest the model and node count support).
        #[arg(long)]
        f: Option<usize>,
        /// Write the report plus the three full phase transcripts here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &PathBuf) -> Result<String, (i32, serde_json::Value)> {
    fs::read_to_string(path).map_err(|e| {
        (
            EXIT_INPUT,
            serde_json::json!({ "error": format!("cannot read {}: {e}", path.display()) }),
        )
    })
}

/// Attach the input file paths to an error report so parse failures name
/// their source. serde errors already carry line/column positions.
fn with_files(mut report: serde_json::Value, files: &[(&str, &PathBuf)]) -> serde_json::Value {
    if report.get("error").is_some() {
        let map: serde_json::Map<String, serde_json::Value> = files
            .iter()
            .map(|(k, p)| ((*k).to_string(), serde_json::json!(p.display().to_string())))
            .collect();
        report["files"] = serde_json::Value::Object(map);
    }
    report
}

/// Error reports (`{"error": ...}` with exit 1) go to stderr; everything
/// else goes to stdout and, when requested, to `--out`.
fn emit(
    code: i32,
    report: &serde_json::Value,
    out: &Option<PathBuf>,
) -> Result<(), (i32, serde_json::Value)> {
    let pretty = serde_json::to_string_pretty(report).expect("report serializes");
    if code == EXIT_INPUT && report.get("error").is_some() {
        eprintln!("{pretty}");
        return Ok(());
    }
    println!("{pretty}");
    if let Some(path) = out {
        fs::write(path, &pretty).map_err(|e| {
            (
                EXIT_INPUT,
                serde_json::json!({ "error": format!("cannot write {}: {e}", path.display()) }),
            )
        })?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<i32, (i32, serde_json::Value)> {
    match cli.cmd {
        Cmd::Check {
            graph,
            fault_model,
            out,
        } => {
            let (code, report) = harness::cmd_check(&read(&graph)?, &read(&fault_model)?);
            let report = with_files(report, &[("graph", &graph), ("fault_model", &fault_model)]);
            emit(code, &report, &out)?;
            Ok(code)
        }
        Cmd::Simulate {
            scenario,
            config,
            out,
        } => {
            let (code, report) = harness::cmd_simulate(&read(&scenario)?, &read(&config)?);
            let report = with_files(report, &[("scenario", &scenario), ("config", &config)]);
            emit(code, &report, &out)?;
            Ok(code)
        }
        Cmd::Sweep {
            template,
            config,
            adversaries,
            symmetry,
            max_subsets,
            out,
        } => {
            let opts = SweepOptions {
                adversaries: adversaries
                    .map(|s| s.split(',').map(|p| p.trim().to_string()).collect()),
                symmetry,
                max_runs: max_subsets,
            };
            let (code, report) = harness::cmd_sweep(&read(&template)?, &read(&config)?, &opts);
            let report = with_files(report, &[("template", &template), ("config", &config)]);
            emit(code, &report, &out)?;
            Ok(code)
        }
        Cmd::DemoImpossibility {
            graph,
            fault_model,
            f,
            out,
        } => {
            let (code, report, transcripts) =
                harness::cmd_demo_impossibility(&read(&graph)?, &read(&fault_model)?, f);
            let report = with_files(report, &[("graph", &graph), ("fault_model", &fault_model)]);
            if code == EXIT_INPUT && report.get("error").is_some() {
                eprintln!("{}", serde_json::to_string_pretty(&report).expect("serializes"));
                return Ok(code);
            }
            // stdout carries the compact report; --out also gets the full
            // phase transcripts.
            let pretty = serde_json::to_string_pretty(&report).expect("report serializes");
            println!("{pretty}");
            if let Some(path) = out {
                let full = serde_json::json!({
                    "report": report,
                    "transcripts": transcripts.iter().map(|t| t.to_json()).collect::<Vec<_>>(),
                });
                fs::write(&path, serde_json::to_string_pretty(&full).expect("serializes"))
                    .map_err(|e| {
                        (
                            EXIT_INPUT,
                            serde_json::json!({
                                "error": format!("cannot write {}: {e}", path.display())
                            }),
                        )
                    })?;
            }
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err((code, report)) => {
            eprintln!("{}", serde_json::to_string_pretty(&report).expect("serializes"));
            ExitCode::from(code as u8)
        }
    }
}
