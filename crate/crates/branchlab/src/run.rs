//! Solver plumbing shared by the pipeline stages: wall clock, policy specs,
//! reference optima and report files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use branchlab_core::bnb::TraceRecord;
use branchlab_core::milp::{brute_force_optimum, OracleOutcome};
use branchlab_core::{solve, solve_with, BranchObserver, Clock, MilpInstance, Policy, SolveConfig, SolveError, SolveReport};

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::io::{atomic_write, write_json, IoError};

/// Lattice size up to which reference optima come from enumeration.
pub const ORACLE_LIMIT: u64 = 200_000;

pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Solves with wall-clock time limits.
pub fn solve_timed(
    inst: &MilpInstance,
    cfg: &SolveConfig,
    policy: &Policy,
    observer: &mut dyn BranchObserver,
) -> Result<SolveReport, SolveError> {
    solve_with(inst, cfg, policy, observer, &WallClock::start())
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("unknown policy `{0}` (expected random, pscost, strong, expert, learned or NAME=CHECKPOINT)")]
    Unknown(String),
    #[error("policy `{0}` needs a checkpoint (use --model {0}=PATH)")]
    MissingModel(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// A policy with the label it carries in reports.
#[derive(Clone, Debug)]
pub struct NamedPolicy {
    pub label: String,
    pub policy: Policy,
}

pub fn load_learned(path: &Path) -> Result<Policy, PolicyError> {
    let ckpt = Checkpoint::load(path)?;
    Ok(Policy::Learned(Arc::new(ckpt.net()?)))
}

/// Resolves a policy token. Built-in names map to the classical rules;
/// `NAME=PATH` and names listed in `models` load checkpoints.
pub fn parse_policy(token: &str, models: &BTreeMap<String, PathBuf>) -> Result<NamedPolicy, PolicyError> {
    let named = |label: &str, policy| Ok(NamedPolicy { label: label.to_string(), policy });
    if let Some((label, path)) = token.split_once('=') {
        return named(label, load_learned(Path::new(path))?);
    }
    match token {
        "random" => named(token, Policy::Random),
        "pscost" => named(token, Policy::Pscost),
        "strong" | "fullstrong" => named("strong", Policy::FullStrong),
        "expert" | "hybrid" | "hybrid-reliability" => named("expert", Policy::expert()),
        _ => match models.get(token) {
            Some(path) => named(token, load_learned(path)?),
            None if token == "learned" || token == "notree" || token == "treegate" => {
                Err(PolicyError::MissingModel(token.to_string()))
            }
            None => Err(PolicyError::Unknown(token.to_string())),
        },
    }
}

/// The instance's known optimum, else the oracle value on small boxes,
/// else the value found by a full solve. `None` means infeasible.
pub fn reference_optimum(inst: &MilpInstance) -> Result<Option<f64>, SolveError> {
    if let Some(v) = inst.known_optimum {
        return Ok(Some(v));
    }
    if let Ok(outcome) = brute_force_optimum(inst, ORACLE_LIMIT) {
        return Ok(match outcome {
            OracleOutcome::Optimal { value, .. } => Some(value),
            OracleOutcome::Infeasible => None,
        });
    }
    Ok(solve(inst, &SolveConfig::default(), &Policy::Pscost)?.value)
}

/// Fills `known_optimum` where missing.
pub fn annotate_optimum(inst: &mut MilpInstance) -> Result<(), SolveError> {
    inst.known_optimum = reference_optimum(inst)?;
    Ok(())
}

pub fn trace_jsonl(trace: &[TraceRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in trace {
        serde_json::to_writer(&mut out, r).expect("trace records serialize");
        out.push(b'\n');
    }
    out
}

/// Writes `report.json` (without the trace) and, optionally, `trace.jsonl`.
pub fn write_report(dir: &Path, report: &SolveReport, with_trace: bool) -> Result<(), IoError> {
    let mut slim = report.clone();
    slim.trace.clear();
    write_json(&dir.join("report.json"), &slim)?;
    if with_trace {
        atomic_write(&dir.join("trace.jsonl"), &trace_jsonl(&report.trace))?;
    }
    Ok(())
}
