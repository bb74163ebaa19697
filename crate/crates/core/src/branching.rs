//! Branching variable selection rules and the pseudocost history.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bnb::stats::{Direction, SearchStats};
use crate::features::{var_score, CandidateMatrix, TreeState};
use crate::lp::{Basis, LpSolver, LpStatus};
use crate::neural::{NetError, PolicyNet};
use crate::num::{ceil, floor};

/// Floor applied to each directional gain in the product rule.
pub const SCORE_EPS: f64 = 1e-6;
/// Gain assigned to an infeasible child.
pub const INFEASIBLE_GAIN: f64 = 1e10;
pub const SCORE_CAP: f64 = 1e20;

/// `max(down, ε) · max(up, ε)`, capped at [`SCORE_CAP`].
pub fn product_score(down: f64, up: f64) -> f64 {
    (down.max(SCORE_EPS) * up.max(SCORE_EPS)).min(SCORE_CAP)
}

/// `(x − ⌊x⌋, ⌈x⌉ − x)`.
pub fn fractionalities(x: f64) -> (f64, f64) {
    (x - floor(x), ceil(x) - x)
}

/// Per-variable, per-direction sums of unit gains (gain / fractionality).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudocostTable {
    sum: Vec<[f64; 2]>,
    count: Vec<[u64; 2]>,
    global_sum: [f64; 2],
    global_sq: [f64; 2],
    global_count: [u64; 2],
}

impl PseudocostTable {
    pub fn new(n_vars: usize) -> Self {
        PseudocostTable {
            sum: vec![[0.0; 2]; n_vars],
            count: vec![[0; 2]; n_vars],
            global_sum: [0.0; 2],
            global_sq: [0.0; 2],
            global_count: [0; 2],
        }
    }

    /// Records an observed bound gain over a split of size `frac`.
    pub fn observe(&mut self, var: usize, d: Direction, gain: f64, frac: f64) {
        if frac <= 0.0 || !gain.is_finite() {
            return;
        }
        let unit = gain.max(0.0) / frac;
        let k = d.index();
        self.sum[var][k] += unit;
        self.count[var][k] += 1;
        self.global_sum[k] += unit;
        self.global_sq[k] += unit * unit;
        self.global_count[k] += 1;
    }

    pub fn count(&self, var: usize, d: Direction) -> u64 {
        self.count[var][d.index()]
    }

    pub fn total_count(&self, d: Direction) -> u64 {
        self.global_count[d.index()]
    }

    pub fn var_mean(&self, var: usize, d: Direction) -> Option<f64> {
        let k = d.index();
        (self.count[var][k] > 0).then(|| self.sum[var][k] / self.count[var][k] as f64)
    }

    pub fn global_mean(&self, d: Direction) -> Option<f64> {
        let k = d.index();
        (self.global_count[k] > 0).then(|| self.global_sum[k] / self.global_count[k] as f64)
    }

    /// Population variance of all unit gains in direction `d`.
    pub fn global_variance(&self, d: Direction) -> f64 {
        let k = d.index();
        match self.global_count[k] {
            0 => 0.0,
            c => {
                let mean = self.global_sum[k] / c as f64;
                (self.global_sq[k] / c as f64 - mean * mean).max(0.0)
            }
        }
    }

    /// Unit gain used for scoring: the variable's mean, else the global mean
    /// for that direction, else 1.
    pub fn estimate(&self, var: usize, d: Direction) -> f64 {
        self.var_mean(var, d).or_else(|| self.global_mean(d)).unwrap_or(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridParams {
    /// Minimum per-direction pseudocost count for a variable to skip probing.
    pub reliability: u64,
    pub w_pseudocost: f64,
    pub w_cutoff: f64,
    pub w_inference: f64,
    pub w_conflict: f64,
    pub w_conflict_length: f64,
}

impl Default for HybridParams {
    fn default() -> Self {
        HybridParams {
            reliability: 8,
            w_pseudocost: 1.0,
            w_cutoff: 1e-4,
            w_inference: 1e-4,
            w_conflict: 0.01,
            w_conflict_length: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Policy {
    Random,
    Pscost,
    FullStrong,
    HybridReliability(HybridParams),
    Learned(Arc<PolicyNet>),
}

impl Policy {
    pub fn expert() -> Self {
        Policy::HybridReliability(HybridParams::default())
    }

    pub fn id(&self) -> &'static str {
        match self {
            Policy::Random => "random",
            Policy::Pscost => "pscost",
            Policy::FullStrong => "fullstrong",
            Policy::HybridReliability(_) => "hybrid-reliability",
            Policy::Learned(_) => "learned",
        }
    }

    pub fn needs_features(&self) -> bool {
        matches!(self, Policy::Learned(_))
    }

    /// Whether the rule ever solves strong-branching probe LPs.
    pub fn uses_strong_branching(&self) -> bool {
        matches!(self, Policy::FullStrong | Policy::HybridReliability(_))
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum BranchError {
    #[error("empty candidate set")]
    NoCandidates,
    #[error("learned policy invoked without features")]
    MissingFeatures,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// What a rule may look at and update while scoring candidates at a node.
pub struct BranchContext<'a> {
    pub lp: &'a LpSolver,
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    /// Node LP solution.
    pub x: &'a [f64],
    pub objective: f64,
    pub basis: Option<&'a Basis>,
    /// Current pruning bound (incumbent or cutoff).
    pub cutoff_bound: f64,
    pub stats: &'a mut SearchStats,
}

/// Child outcome of a strong-branching probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbeChild {
    Infeasible,
    Bound(f64),
}

impl<'a> BranchContext<'a> {
    fn probe_child(&mut self, var: usize, d: Direction) -> Option<ProbeChild> {
        let mut lower = self.lower.to_vec();
        let mut upper = self.upper.to_vec();
        match d {
            Direction::Down => upper[var] = floor(self.x[var]),
            Direction::Up => lower[var] = ceil(self.x[var]),
        }
        let res = self.lp.solve(&lower, &upper, self.basis).ok()?;
        self.stats.lp_solves += 1;
        self.stats.sb_probes += 1;
        self.stats.lp_iterations += res.iterations as u64;
        match res.status {
            LpStatus::Optimal => {
                if res.objective >= self.cutoff_bound - 1e-9 {
                    self.stats.sb_probe_cutoffs += 1;
                }
                Some(ProbeChild::Bound(res.objective))
            }
            LpStatus::Infeasible => {
                self.stats.sb_probe_cutoffs += 1;
                self.stats.credit_cutoff(var, d);
                Some(ProbeChild::Infeasible)
            }
            LpStatus::Unbounded | LpStatus::IterationLimit => None,
        }
    }

    /// Solves both child LPs of `var`; returns the two gains, or `None` when
    /// a probe LP failed. Feasible probes feed the pseudocost table.
    pub fn probe(&mut self, var: usize) -> Option<(f64, f64)> {
        let (fd, fu) = fractionalities(self.x[var]);
        let mut gains = [0.0; 2];
        for (d, frac) in [(Direction::Down, fd), (Direction::Up, fu)] {
            gains[d.index()] = match self.probe_child(var, d)? {
                ProbeChild::Infeasible => INFEASIBLE_GAIN,
                ProbeChild::Bound(lb) => {
                    let gain = (lb - self.objective).max(0.0);
                    self.stats.pseudocosts.observe(var, d, gain, frac);
                    gain
                }
            };
        }
        Some((gains[0], gains[1]))
    }
}

/// Pseudocost product scores.
pub fn score_pscost(x: &[f64], candidates: &[usize], table: &PseudocostTable) -> Vec<f64> {
    candidates
        .iter()
        .map(|&j| {
            let (fd, fu) = fractionalities(x[j]);
            product_score(table.estimate(j, Direction::Down) * fd, table.estimate(j, Direction::Up) * fu)
        })
        .collect()
}

/// Full strong branching scores; failed probes fall back to pseudocosts.
pub fn score_strong(ctx: &mut BranchContext<'_>, candidates: &[usize]) -> Vec<f64> {
    candidates
        .iter()
        .map(|&j| match ctx.probe(j) {
            Some((gd, gu)) => product_score(gd, gu),
            None => score_pscost(ctx.x, &[j], &ctx.stats.pseudocosts)[0],
        })
        .collect()
}

/// Reliability-hybrid expert: probes unreliable candidates, then combines
/// the pseudocost (or fresh probe) score with the cutoff, inference and
/// conflict histories through `var_score`.
pub fn score_hybrid_expert(ctx: &mut BranchContext<'_>, candidates: &[usize], params: &HybridParams) -> Vec<f64> {
    let mut pc_scores = Vec::with_capacity(candidates.len());
    for &j in candidates {
        let table = &ctx.stats.pseudocosts;
        let reliable = table.count(j, Direction::Down).min(table.count(j, Direction::Up)) >= params.reliability;
        let probed = if reliable { None } else { ctx.probe(j) };
        pc_scores.push(match probed {
            Some((gd, gu)) => product_score(gd, gu),
            None => score_pscost(ctx.x, &[j], &ctx.stats.pseudocosts)[0],
        });
    }
    let stats = &*ctx.stats;
    let pc_avg = stats.avg_pseudocost_score();
    let cutoff_avg = stats.avg_cutoff_score();
    let inf_avg = stats.avg_inference_score();
    let conf_avg = stats.avg_conflict_score();
    let cl_avg = stats.avg_conflict_length_score();
    candidates
        .iter()
        .zip(pc_scores)
        .map(|(&j, pc)| {
            params.w_pseudocost * var_score(pc, pc_avg)
                + params.w_cutoff * var_score(stats.var_cutoff_score(j), cutoff_avg)
                + params.w_inference * var_score(stats.var_inference_score(j), inf_avg)
                + params.w_conflict * var_score(stats.var_conflict_score(j), conf_avg)
                + params.w_conflict_length * var_score(stats.var_conflict_length_score(j), cl_avg)
        })
        .collect()
}

/// Position of the maximum; the first (lowest) position wins ties.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Picks a position in `candidates` according to `policy`.
pub fn choose<R: Rng>(
    policy: &Policy,
    ctx: &mut BranchContext<'_>,
    candidates: &[usize],
    rng: &mut R,
    features: Option<(&CandidateMatrix, &TreeState)>,
) -> Result<usize, BranchError> {
    match candidates.len() {
        0 => return Err(BranchError::NoCandidates),
        1 => return Ok(0),
        _ => {}
    }
    let scores = match policy {
        Policy::Random => return Ok(rng.gen_range(0..candidates.len())),
        Policy::Pscost => score_pscost(ctx.x, candidates, &ctx.stats.pseudocosts),
        Policy::FullStrong => score_strong(ctx, candidates),
        Policy::HybridReliability(p) => score_hybrid_expert(ctx, candidates, p),
        Policy::Learned(net) => {
            let (cands, tree) = features.ok_or(BranchError::MissingFeatures)?;
            let tree = net.spec.kind.uses_tree().then_some(tree);
            net.forward(cands, tree)?.logits
        }
    };
    Ok(argmax(&scores).expect("nonempty scores"))
}
