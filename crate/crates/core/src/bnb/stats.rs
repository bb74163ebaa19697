//! Counters maintained during a solve. The tree-state and candidate features
//! are pure functions of these plus the current node and open list.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::branching::{product_score, PseudocostTable};
use crate::num::{abs, safe_div};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Down, Direction::Up];

    pub fn index(self) -> usize {
        match self {
            Direction::Down => 0,
            Direction::Up => 1,
        }
    }
}

/// Per-variable, per-direction history.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DirStats {
    pub branchings: u64,
    pub depth_sum: f64,
    pub cutoffs: u64,
    pub inferences: f64,
    /// Conflict analysis is not implemented; these stay at zero.
    pub conflict_score: f64,
    pub conflict_length: f64,
    pub conflicts: u64,
    pub implications: u64,
    pub cliques: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VarStats {
    pub dir: [DirStats; 2],
    pub lp_sol_sum: f64,
    pub lp_sol_count: u64,
}

impl VarStats {
    pub fn get(&self, d: Direction) -> &DirStats {
        &self.dir[d.index()]
    }

    pub fn avg_sol(&self, fallback: f64) -> f64 {
        if self.lp_sol_count == 0 {
            fallback
        } else {
            self.lp_sol_sum / self.lp_sol_count as f64
        }
    }
}

/// Product score over optional per-direction values; `0` when neither
/// direction has history.
pub fn history_score(down: Option<f64>, up: Option<f64>) -> f64 {
    if down.is_none() && up.is_none() {
        return 0.0;
    }
    product_score(down.unwrap_or(0.0), up.unwrap_or(0.0))
}

/// Bounded gap between an upper and a lower bound: `0` when equal, `1` when
/// the upper bound is infinite or the signs differ, else
/// `|u − l| / max(|u|, |l|)`.
pub fn primal_dual_gap(upper: f64, lower: f64) -> f64 {
    if !upper.is_finite() || !lower.is_finite() {
        return 1.0;
    }
    if abs(upper - lower) <= 1e-12 {
        return 0.0;
    }
    if upper * lower < 0.0 {
        return 1.0;
    }
    (abs(upper - lower) / abs(upper).max(abs(lower))).min(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub n_vars: usize,
    pub n_discrete: usize,

    pub global_lower: f64,
    pub root_lower: Option<f64>,
    pub incumbent: Option<f64>,
    pub cutoff: Option<f64>,

    pub created: u64,
    pub processed: u64,
    pub activated: u64,
    pub deactivated: u64,
    pub internal: u64,
    pub leaves_infeasible: u64,
    pub leaves_objlimit: u64,
    pub leaves_feasible: u64,

    pub backtracks: u64,
    pub plunge_depth: u64,
    pub max_depth: u64,

    pub lp_iterations: u64,
    pub lp_solves: u64,
    pub node_lps: u64,

    pub first_sol_gap: Option<f64>,
    pub last_sol_gap: Option<f64>,
    pub nodes_before_first: Option<u64>,

    pub primal_dual_integral: f64,
    pub step_clock: f64,

    /// Total branchings performed (each creating two children).
    pub branchings: u64,
    pub sb_probes: u64,
    /// Strong-branching probe LPs whose child was infeasible or beyond the
    /// cutoff bound; drives the fair node count.
    pub sb_probe_cutoffs: u64,

    pub vars: Vec<VarStats>,
    pub pseudocosts: PseudocostTable,
    /// Sums over all variables, per direction.
    pub total: [DirStats; 2],
    pub conflicts_applied: u64,
    pub total_cliques: u64,
}

impl SearchStats {
    pub fn new(n_vars: usize, n_discrete: usize, cutoff: Option<f64>) -> Self {
        SearchStats {
            n_vars,
            n_discrete,
            global_lower: f64::NEG_INFINITY,
            root_lower: None,
            incumbent: None,
            cutoff,
            created: 0,
            processed: 0,
            activated: 0,
            deactivated: 0,
            internal: 0,
            leaves_infeasible: 0,
            leaves_objlimit: 0,
            leaves_feasible: 0,
            backtracks: 0,
            plunge_depth: 0,
            max_depth: 0,
            lp_iterations: 0,
            lp_solves: 0,
            node_lps: 0,
            first_sol_gap: None,
            last_sol_gap: None,
            nodes_before_first: None,
            primal_dual_integral: 0.0,
            step_clock: 0.0,
            branchings: 0,
            sb_probes: 0,
            sb_probe_cutoffs: 0,
            vars: vec![VarStats::default(); n_vars],
            pseudocosts: PseudocostTable::new(n_vars),
            total: [DirStats::default(); 2],
            conflicts_applied: 0,
            total_cliques: 0,
        }
    }

    /// Pruning bound: the better of incumbent and cutoff.
    pub fn upper_bound(&self) -> f64 {
        match (self.incumbent, self.cutoff) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => f64::INFINITY,
        }
    }

    /// `true` when the pruning bound comes from a found solution.
    pub fn upper_is_solution(&self) -> bool {
        match (self.incumbent, self.cutoff) {
            (Some(a), Some(b)) => a <= b,
            (Some(_), None) => true,
            _ => false,
        }
    }

    pub fn leaves(&self) -> u64 {
        self.leaves_infeasible + self.leaves_objlimit + self.leaves_feasible
    }

    pub fn gap(&self) -> f64 {
        primal_dual_gap(self.upper_bound(), self.global_lower)
    }

    /// Advances the deterministic clock, integrating the current gap.
    pub fn tick(&mut self, steps: f64) {
        self.primal_dual_integral += self.gap() * steps;
        self.step_clock += steps;
    }

    pub fn record_lp_solution(&mut self, x: &[f64]) {
        for (v, &xj) in self.vars.iter_mut().zip(x) {
            v.lp_sol_sum += xj;
            v.lp_sol_count += 1;
        }
    }

    pub fn record_branching(&mut self, var: usize, depth: u64) {
        self.branchings += 1;
        for d in Direction::BOTH {
            let s = &mut self.vars[var].dir[d.index()];
            s.branchings += 1;
            s.depth_sum += depth as f64;
            let t = &mut self.total[d.index()];
            t.branchings += 1;
            t.depth_sum += depth as f64;
        }
    }

    pub fn credit_cutoff(&mut self, var: usize, d: Direction) {
        self.vars[var].dir[d.index()].cutoffs += 1;
        self.total[d.index()].cutoffs += 1;
    }

    pub fn credit_inferences(&mut self, var: usize, d: Direction, count: u64) {
        self.vars[var].dir[d.index()].inferences += count as f64;
        self.total[d.index()].inferences += count as f64;
    }

    pub fn record_incumbent(&mut self, value: f64) {
        self.incumbent = Some(self.incumbent.map_or(value, |v| v.min(value)));
        let gap = self.gap();
        if self.first_sol_gap.is_none() {
            self.first_sol_gap = Some(gap);
            self.nodes_before_first = Some(self.processed);
        }
        self.last_sol_gap = Some(gap);
    }

    // ---- per-variable averages ----

    fn dir_avg(&self, var: usize, d: Direction, f: impl Fn(&DirStats) -> f64) -> Option<f64> {
        let s = self.vars[var].get(d);
        (s.branchings > 0).then(|| f(s) / s.branchings as f64)
    }

    pub fn var_avg_cutoffs(&self, var: usize, d: Direction) -> f64 {
        self.dir_avg(var, d, |s| s.cutoffs as f64).unwrap_or(0.0)
    }

    pub fn var_avg_inferences(&self, var: usize, d: Direction) -> f64 {
        self.dir_avg(var, d, |s| s.inferences).unwrap_or(0.0)
    }

    pub fn var_avg_conflict_length(&self, var: usize, d: Direction) -> f64 {
        let s = self.vars[var].get(d);
        safe_div(s.conflict_length, s.conflicts as f64)
    }

    pub fn var_avg_branch_depth(&self, var: usize, d: Direction) -> f64 {
        self.dir_avg(var, d, |s| s.depth_sum).unwrap_or(0.0)
    }

    pub fn var_cutoff_score(&self, var: usize) -> f64 {
        history_score(
            self.dir_avg(var, Direction::Down, |s| s.cutoffs as f64),
            self.dir_avg(var, Direction::Up, |s| s.cutoffs as f64),
        )
    }

    pub fn var_inference_score(&self, var: usize) -> f64 {
        history_score(
            self.dir_avg(var, Direction::Down, |s| s.inferences),
            self.dir_avg(var, Direction::Up, |s| s.inferences),
        )
    }

    pub fn var_conflict_score(&self, var: usize) -> f64 {
        let v = &self.vars[var];
        let has = |d: Direction| (v.get(d).conflicts > 0).then(|| v.get(d).conflict_score);
        history_score(has(Direction::Down), has(Direction::Up))
    }

    pub fn var_conflict_length_score(&self, var: usize) -> f64 {
        let v = &self.vars[var];
        let has = |d: Direction| {
            let s = v.get(d);
            (s.conflicts > 0).then(|| s.conflict_length / s.conflicts as f64)
        };
        history_score(has(Direction::Down), has(Direction::Up))
    }

    /// Pseudocost score from observed history only (no priors).
    pub fn var_pseudocost_score(&self, var: usize, x: f64) -> f64 {
        let (fd, fu) = crate::branching::fractionalities(x);
        history_score(
            self.pseudocosts.var_mean(var, Direction::Down).map(|g| g * fd),
            self.pseudocosts.var_mean(var, Direction::Up).map(|g| g * fu),
        )
    }

    // ---- global averages ----

    fn total_avg(&self, d: Direction, f: impl Fn(&DirStats) -> f64) -> Option<f64> {
        let t = &self.total[d.index()];
        (t.branchings > 0).then(|| f(t) / t.branchings as f64)
    }

    pub fn avg_cutoffs(&self, d: Direction) -> f64 {
        self.total_avg(d, |s| s.cutoffs as f64).unwrap_or(0.0)
    }

    pub fn avg_inferences(&self, d: Direction) -> f64 {
        self.total_avg(d, |s| s.inferences).unwrap_or(0.0)
    }

    pub fn avg_cutoff_score(&self) -> f64 {
        history_score(
            self.total_avg(Direction::Down, |s| s.cutoffs as f64),
            self.total_avg(Direction::Up, |s| s.cutoffs as f64),
        )
    }

    pub fn avg_inference_score(&self) -> f64 {
        history_score(
            self.total_avg(Direction::Down, |s| s.inferences),
            self.total_avg(Direction::Up, |s| s.inferences),
        )
    }

    pub fn avg_conflict_score(&self) -> f64 {
        let has = |d: Direction| {
            let t = &self.total[d.index()];
            (t.conflicts > 0).then(|| t.conflict_score / t.conflicts as f64)
        };
        history_score(has(Direction::Down), has(Direction::Up))
    }

    pub fn avg_conflict_length_score(&self) -> f64 {
        let has = |d: Direction| {
            let t = &self.total[d.index()];
            (t.conflicts > 0).then(|| t.conflict_length / t.conflicts as f64)
        };
        history_score(has(Direction::Down), has(Direction::Up))
    }

    /// Average pseudocost score at fractionality 0.5 in both directions.
    pub fn avg_pseudocost_score(&self) -> f64 {
        history_score(
            self.pseudocosts.global_mean(Direction::Down).map(|g| 0.5 * g),
            self.pseudocosts.global_mean(Direction::Up).map(|g| 0.5 * g),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_function_cases() {
        assert_eq!(primal_dual_gap(f64::INFINITY, 0.0), 1.0);
        assert_eq!(primal_dual_gap(5.0, 5.0), 0.0);
        assert_eq!(primal_dual_gap(1.0, -1.0), 1.0);
        assert!((primal_dual_gap(10.0, 8.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn fresh_stats_have_zero_scores() {
        let s = SearchStats::new(3, 3, None);
        assert_eq!(s.var_cutoff_score(0), 0.0);
        assert_eq!(s.var_inference_score(1), 0.0);
        assert_eq!(s.var_pseudocost_score(2, 0.5), 0.0);
        assert_eq!(s.avg_pseudocost_score(), 0.0);
        assert_eq!(s.upper_bound(), f64::INFINITY);
    }

    #[test]
    fn incumbent_history() {
        let mut s = SearchStats::new(1, 1, Some(10.0));
        s.global_lower = 5.0;
        s.processed = 4;
        s.record_incumbent(8.0);
        assert_eq!(s.nodes_before_first, Some(4));
        assert!((s.first_sol_gap.unwrap() - 3.0 / 8.0).abs() < 1e-15);
        assert!(s.upper_is_solution());
    }
}
