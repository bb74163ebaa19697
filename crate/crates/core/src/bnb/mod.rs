//! Branch-and-bound tree search.
//!
//! Best-bound node selection with child plunging, single-pass bound
//! propagation at each node, warm-started node LPs and a pluggable branching
//! rule. All bookkeeping the feature builders need lives in [`SearchStats`].

pub mod node;
pub mod propagate;
pub mod select;
pub mod stats;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::branching::{choose, BranchContext, BranchError, Policy};
use crate::features::{build_candidate_matrix, build_tree_state, CandidateMatrix, NodeView, OpenView, TreeState};
use crate::lp::{LpError, LpSolver, LpStatus};
use crate::milp::{InstanceError, MilpInstance};
use crate::num::{is_fractional, round, serde_f64};

pub use node::{BnbNode, BranchInfo, ExpandError};
pub use select::{OpenEntry, OpenList, Selection};
pub use stats::{primal_dual_gap, Direction, SearchStats};

/// Absolute tolerance of the pruning test `lb ≥ U − PRUNE_TOL`.
pub const PRUNE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Seconds, measured by the supplied [`Clock`].
    pub time_limit: f64,
    /// Objective limit: only solutions strictly better are searched for.
    pub cutoff: Option<f64>,
    pub node_limit: Option<u64>,
    /// Seed of the random branching rule.
    pub seed: u64,
    /// Seed of the variable-order shuffle; `None` keeps the input order.
    pub permutation_seed: Option<u64>,
    /// Number of initial branchings made uniformly at random.
    pub k_random: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { time_limit: 3600.0, cutoff: None, node_limit: None, seed: 0, permutation_seed: None, k_random: 0 }
    }
}

impl SolveConfig {
    /// Seed `s` drives both the random rule and the variable permutation.
    pub fn seeded(seed: u64) -> Self {
        SolveConfig { seed, permutation_seed: Some(seed), ..SolveConfig::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// A cutoff was given and no solution below it exists.
    CutoffProved,
    Infeasible,
    TimeLimit,
    NodeLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::CutoffProved => "cutoff-proved",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::TimeLimit => "time-limit",
            SolveStatus::NodeLimit => "node-limit",
        }
    }

    pub fn is_limit(self) -> bool {
        matches!(self, SolveStatus::TimeLimit | SolveStatus::NodeLimit)
    }
}

/// One branching decision, with variables in the caller's original order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub node: usize,
    pub depth: u64,
    pub candidates: Vec<usize>,
    pub chosen: usize,
    pub var: usize,
    pub value: f64,
    pub random: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub instance: String,
    pub policy: String,
    pub status: SolveStatus,
    /// Best objective found, in minimization form.
    pub value: Option<f64>,
    pub solution: Option<Vec<f64>>,
    pub nodes: u64,
    pub fair_nodes: u64,
    pub created: u64,
    pub branchings: u64,
    pub lp_iterations: u64,
    pub sb_probes: u64,
    pub wall_time: f64,
    /// Deterministic clock: LP iterations plus one per node.
    pub steps: f64,
    #[serde(with = "serde_f64")]
    pub lower_bound: f64,
    #[serde(with = "serde_f64")]
    pub upper_bound: f64,
    pub gap: f64,
    pub primal_dual_integral: f64,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Branch(#[from] BranchError),
    #[error(transparent)]
    Expand(#[from] ExpandError),
    #[error("LP relaxation of node {0} is unbounded")]
    Unbounded(usize),
    #[error("LP of node {0} hit the iteration limit")]
    LpIterationLimit(usize),
}

/// Wall-clock source; the core crate has no OS access.
pub trait Clock {
    /// Seconds since the solve started.
    fn elapsed(&self) -> f64;
}

/// A clock that never advances.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeOutcome {
    Branched,
    Feasible,
    Infeasible,
    /// Bound at or above the pruning bound.
    Pruned,
}

/// Snapshot after a node has been processed.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeEvent {
    pub id: usize,
    pub depth: u64,
    pub outcome: NodeOutcome,
    pub node_lower_bound: f64,
    pub global_lower: f64,
    pub upper_bound: f64,
    pub created: u64,
    pub processed: u64,
    pub open: usize,
    pub open_lower_bounds: Vec<f64>,
}

pub struct BranchEvent<'a> {
    pub step: u64,
    pub node: usize,
    pub depth: u64,
    /// Candidate variables in the caller's original order.
    pub candidates: &'a [usize],
    /// Position chosen by the active rule.
    pub chosen: usize,
    /// The choice came from the random prefix rather than the policy.
    pub random: bool,
    pub features: Option<(&'a CandidateMatrix, &'a TreeState)>,
    pub stats: &'a SearchStats,
}

pub trait BranchObserver {
    /// Whether features should be built at every branching.
    fn wants_features(&self) -> bool {
        false
    }

    fn on_branch(&mut self, _event: &BranchEvent<'_>) {}

    fn on_node(&mut self, _event: &NodeEvent) {}
}

/// Observer that does nothing.
pub struct NoObserver;

impl BranchObserver for NoObserver {}

pub fn solve(inst: &MilpInstance, cfg: &SolveConfig, policy: &Policy) -> Result<SolveReport, SolveError> {
    solve_with(inst, cfg, policy, &mut NoObserver, &NoClock)
}

struct Tree {
    /// (parent, depth) of every node ever created, by id.
    meta: Vec<(Option<usize>, u64)>,
    nodes: BTreeMap<usize, BnbNode>,
    open: OpenList,
}

impl Tree {
    /// Path switch from `from` to `to`: (deactivated, activated).
    fn switch(&self, from: Option<usize>, to: usize) -> (u64, u64) {
        let Some(mut a) = from else {
            return (0, self.meta[to].1 + 1);
        };
        let mut b = to;
        let (mut down, mut up) = (0, 0);
        while self.meta[a].1 > self.meta[b].1 {
            a = self.meta[a].0.unwrap();
            down += 1;
        }
        while self.meta[b].1 > self.meta[a].1 {
            b = self.meta[b].0.unwrap();
            up += 1;
        }
        while a != b {
            a = self.meta[a].0.unwrap();
            b = self.meta[b].0.unwrap();
            down += 1;
            up += 1;
        }
        (down, up)
    }
}

/// Runs the search, reporting events to `observer` and reading wall time from
/// `clock`.
pub fn solve_with(
    inst: &MilpInstance,
    cfg: &SolveConfig,
    policy: &Policy,
    observer: &mut dyn BranchObserver,
    clock: &dyn Clock,
) -> Result<SolveReport, SolveError> {
    inst.validate()?;
    let n = inst.num_vars();
    let perm: Vec<usize> = match cfg.permutation_seed {
        Some(s) => {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut ChaCha8Rng::seed_from_u64(s ^ 0x9e37_79b9_7f4a_7c15));
            p
        }
        None => (0..n).collect(),
    };
    let work = inst.permuted(&perm);
    let lp = LpSolver::new(&work)?;
    let integer = work.integrality_mask();
    let columns = work.column_index();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stats = SearchStats::new(n, work.integers.len(), cfg.cutoff);
    let want_features = policy.needs_features() || observer.wants_features();

    let mut tree = Tree { meta: Vec::new(), nodes: BTreeMap::new(), open: OpenList::new() };
    let root = BnbNode::root(work.lower.clone(), work.upper.clone());
    tree.meta.push((None, 0));
    tree.open.push(0, OpenEntry { lower_bound: root.lower_bound, depth: 0, parent: None });
    tree.nodes.insert(0, root);
    stats.created = 1;

    let mut incumbent: Option<Vec<f64>> = None;
    let mut trace = Vec::new();
    let mut last: Option<usize> = None;
    let mut status = None;

    loop {
        if clock.elapsed() >= cfg.time_limit {
            status = Some(SolveStatus::TimeLimit);
            break;
        }
        if cfg.node_limit.is_some_and(|l| stats.processed >= l) {
            status = Some(SolveStatus::NodeLimit);
            break;
        }
        let Some(sel) = tree.open.select_next(last, &mut stats) else { break };
        tree.open.remove(sel.id);
        let mut node = tree.nodes.remove(&sel.id).expect("open node stored");
        let (deact, act) = tree.switch(last, node.id);
        stats.deactivated += deact;
        stats.activated += act;
        last = Some(node.id);
        stats.processed += 1;
        stats.max_depth = stats.max_depth.max(node.depth);

        let outcome = process_node(
            &mut node,
            &work,
            &lp,
            &integer,
            &columns,
            cfg,
            policy,
            &mut stats,
            &mut tree,
            &mut rng,
            &mut incumbent,
            observer,
            &mut trace,
            &perm,
            want_features,
        )?;

        refresh_global_lower(&mut stats, &tree.open, None);
        let (lbs, _) = tree.open.snapshot();
        observer.on_node(&NodeEvent {
            id: node.id,
            depth: node.depth,
            outcome,
            node_lower_bound: node.lower_bound,
            global_lower: stats.global_lower,
            upper_bound: stats.upper_bound(),
            created: stats.created,
            processed: stats.processed,
            open: tree.open.len(),
            open_lower_bounds: lbs,
        });
    }

    if status.is_none() {
        // search exhausted: the bound is closed
        let ub = stats.upper_bound();
        stats.global_lower = if ub.is_finite() { stats.global_lower.max(ub) } else { f64::INFINITY };
    }
    let status = status.unwrap_or(if stats.incumbent.is_some() {
        SolveStatus::Optimal
    } else if cfg.cutoff.is_some() {
        SolveStatus::CutoffProved
    } else {
        SolveStatus::Infeasible
    });

    let solution = incumbent.map(|x| {
        let mut orig = alloc::vec![0.0; n];
        for (i, &p) in perm.iter().enumerate() {
            orig[p] = x[i];
        }
        orig
    });
    Ok(SolveReport {
        instance: inst.name.clone(),
        policy: String::from(policy.id()),
        status,
        value: stats.incumbent,
        solution,
        nodes: stats.processed,
        fair_nodes: stats.processed + stats.sb_probe_cutoffs,
        created: stats.created,
        branchings: stats.branchings,
        lp_iterations: stats.lp_iterations,
        sb_probes: stats.sb_probes,
        wall_time: clock.elapsed(),
        steps: stats.step_clock,
        lower_bound: stats.global_lower,
        upper_bound: stats.upper_bound(),
        gap: stats.gap(),
        primal_dual_integral: stats.primal_dual_integral,
        trace,
    })
}

/// Global lower bound: the least bound among open nodes and the node being
/// processed, never decreasing.
fn refresh_global_lower(stats: &mut SearchStats, open: &OpenList, current: Option<f64>) {
    let mut lb = open.min_lower_bound().unwrap_or(f64::INFINITY);
    if let Some(c) = current {
        lb = lb.min(c);
    }
    let lb = lb.min(stats.upper_bound());
    if lb.is_finite() {
        stats.global_lower = stats.global_lower.max(lb);
    }
}

#[allow(clippy::too_many_arguments)]
fn process_node(
    node: &mut BnbNode,
    work: &MilpInstance,
    lp: &LpSolver,
    integer: &[bool],
    columns: &[Vec<(usize, f64)>],
    cfg: &SolveConfig,
    policy: &Policy,
    stats: &mut SearchStats,
    tree: &mut Tree,
    rng: &mut ChaCha8Rng,
    incumbent: &mut Option<Vec<f64>>,
    observer: &mut dyn BranchObserver,
    trace: &mut Vec<TraceRecord>,
    perm: &[usize],
    want_features: bool,
) -> Result<NodeOutcome, SolveError> {
    if node.lower_bound >= stats.upper_bound() - PRUNE_TOL {
        stats.tick(1.0);
        stats.leaves_objlimit += 1;
        return Ok(NodeOutcome::Pruned);
    }

    if let Some(b) = node.branching {
        let p = propagate::propagate_bounds(&work.rows, &columns[b.var], integer, &mut node.lower, &mut node.upper);
        if p.reductions > 0 {
            stats.credit_inferences(b.var, b.direction, p.reductions);
        }
        if p.infeasible {
            stats.tick(1.0);
            stats.credit_cutoff(b.var, b.direction);
            stats.leaves_infeasible += 1;
            return Ok(NodeOutcome::Infeasible);
        }
    }

    let res = lp.solve(&node.lower, &node.upper, node.hint.as_ref())?;
    stats.lp_solves += 1;
    stats.node_lps += 1;
    stats.lp_iterations += res.iterations as u64;
    stats.tick(res.iterations as f64 + 1.0);
    match res.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            if let Some(b) = node.branching {
                stats.credit_cutoff(b.var, b.direction);
            }
            stats.leaves_infeasible += 1;
            return Ok(NodeOutcome::Infeasible);
        }
        LpStatus::Unbounded => return Err(SolveError::Unbounded(node.id)),
        LpStatus::IterationLimit => return Err(SolveError::LpIterationLimit(node.id)),
    }

    let lb = res.objective.max(node.lower_bound);
    node.lower_bound = lb;
    if let Some(b) = node.branching {
        let gain = (res.objective - b.parent_objective).max(0.0);
        stats.pseudocosts.observe(b.var, b.direction, gain, b.fractionality());
    }
    stats.record_lp_solution(&res.x);
    if node.parent.is_none() {
        stats.root_lower = Some(lb);
    }
    refresh_global_lower(stats, &tree.open, Some(lb));

    if lb >= stats.upper_bound() - PRUNE_TOL {
        stats.leaves_objlimit += 1;
        return Ok(NodeOutcome::Pruned);
    }

    let candidates: Vec<usize> = (0..work.num_vars()).filter(|&j| integer[j] && is_fractional(res.x[j])).collect();
    if candidates.is_empty() {
        let mut x = res.x.clone();
        for j in 0..x.len() {
            if integer[j] {
                x[j] = round(x[j]);
            }
        }
        let value = work.objective_value(&x);
        stats.leaves_feasible += 1;
        if stats.incumbent.is_none_or(|v| value < v) {
            *incumbent = Some(x);
            stats.record_incumbent(value);
            let bound = stats.upper_bound();
            let pruned = tree.open.prune_at_or_above(bound, PRUNE_TOL);
            for id in pruned {
                tree.nodes.remove(&id);
                stats.processed += 1;
                stats.leaves_objlimit += 1;
            }
        }
        return Ok(NodeOutcome::Feasible);
    }

    stats.internal += 1;
    let random = stats.branchings < cfg.k_random;
    let step = stats.branchings;
    let features = if want_features {
        let (lbs, depths) = tree.open.snapshot();
        let view = NodeView {
            depth: node.depth,
            lp_objective: res.objective,
            x: &res.x,
            bound_changes: node.bound_changes(&work.lower, &work.upper),
        };
        let mut cm = build_candidate_matrix(&view, &candidates, stats, step);
        let ts = build_tree_state(
            stats,
            &view,
            candidates.len(),
            &OpenView { lower_bounds: &lbs, depths: &depths },
            step,
        );
        cm.candidates = candidates.iter().map(|&j| perm[j]).collect();
        Some((cm, ts))
    } else {
        None
    };

    let active = if random { &Policy::Random } else { policy };
    let mut ctx = BranchContext {
        lp,
        lower: &node.lower,
        upper: &node.upper,
        x: &res.x,
        objective: res.objective,
        basis: res.basis.as_ref(),
        cutoff_bound: stats.upper_bound(),
        stats,
    };
    let pos = choose(active, &mut ctx, &candidates, rng, features.as_ref().map(|(c, t)| (c, t)))?;
    let var = candidates[pos];
    let original: Vec<usize> = candidates.iter().map(|&j| perm[j]).collect();
    observer.on_branch(&BranchEvent {
        step,
        node: node.id,
        depth: node.depth,
        candidates: &original,
        chosen: pos,
        random,
        features: features.as_ref().map(|(c, t)| (c, t)),
        stats,
    });
    trace.push(TraceRecord {
        step,
        node: node.id,
        depth: node.depth,
        candidates: original.clone(),
        chosen: pos,
        var: perm[var],
        value: res.x[var],
        random,
    });

    stats.record_branching(var, node.depth);
    let ids = (tree.meta.len(), tree.meta.len() + 1);
    let (mut down, mut up) = node.expand(var, res.x[var], integer, res.objective, ids)?;
    down.hint = res.basis.clone();
    up.hint = res.basis;
    for child in [down, up] {
        tree.meta.push((Some(node.id), child.depth));
        tree.open.push(child.id, OpenEntry { lower_bound: child.lower_bound, depth: child.depth, parent: Some(node.id) });
        tree.nodes.insert(child.id, child);
    }
    stats.created += 2;
    Ok(NodeOutcome::Branched)
}
