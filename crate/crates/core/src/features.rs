//! Search-tree parameterization: normalization helpers, the per-candidate
//! 25-feature columns and the 61-feature tree state.
//!
//! Every ratio goes through [`safe_div`] (zero denominators give `0`) and
//! every logarithm through [`safe_ln`] (non-positive arguments give `0`), so
//! emitted values are always finite. Counters for conflict analysis,
//! implications and cliques are never incremented by this solver; those rows
//! carry the formulas' zero-input values.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bnb::stats::{primal_dual_gap, Direction, SearchStats};
use crate::num::{abs, ln, safe_div, sqrt};

pub const CANDIDATE_DIM: usize = 25;
pub const TREE_DIM: usize = 61;

/// Row names of the candidate matrix, in layout order.
pub const CANDIDATE_FEATURES: [&str; CANDIDATE_DIM] = [
    "lp_sol",
    "avg_sol",
    "branch_depth_down",
    "branch_depth_up",
    "score_conflict",
    "score_conflict_length",
    "score_inference",
    "score_cutoff",
    "score_pseudocost",
    "pc_count_share_down",
    "pc_count_share_up",
    "pc_count_per_branching_down",
    "pc_count_per_branching_up",
    "pc_count_per_total_branchings_down",
    "pc_count_per_total_branchings_up",
    "implications_down",
    "implications_up",
    "cliques_down",
    "cliques_up",
    "avg_cutoffs_down",
    "avg_cutoffs_up",
    "avg_conflict_length_down",
    "avg_conflict_length_up",
    "avg_inferences_down",
    "avg_inferences_up",
];

/// Entry names of the tree state, in layout order.
pub const TREE_FEATURES: [&str; TREE_DIM] = [
    // current node (8)
    "depth_over_max_depth",
    "plunge_over_depth",
    "reldist_lower_nodelp",
    "reldist_rootlower_nodelp",
    "reldist_upper_nodelp",
    "relpos_nodelp",
    "candidates_over_discrete",
    "boundchanges_over_vars",
    // nodes and leaves (8)
    "objlim_leaves_share",
    "infeasible_leaves_share",
    "feasible_leaves_share",
    "infeasible_over_objlim_leaves",
    "open_over_nodes",
    "leaves_over_nodes",
    "internal_over_nodes",
    "nodes_over_created",
    // depth and backtracks (4)
    "activated_over_nodes",
    "deactivated_over_nodes",
    "plunge_over_max_depth",
    "backtracks_over_nodes",
    // lp iterations (4)
    "log_iterations_per_node",
    "log_lps_per_node",
    "nodes_over_lps",
    "node_lps_over_lps",
    // gap (4)
    "log_primal_dual_integral",
    "gap_over_last_sol_gap",
    "gap_over_first_sol_gap",
    "last_over_first_sol_gap",
    // bounds and solutions (5)
    "reldist_rootlower_lower",
    "reldist_rootlower_avglower",
    "reldist_upper_lower",
    "upper_is_solution",
    "nodes_before_first_over_nodes",
    // average scores (12)
    "avg_conflict_score",
    "avg_conflict_length_score",
    "avg_inference_score",
    "avg_cutoff_score",
    "avg_pseudocost_score",
    "avg_cutoffs_down",
    "avg_cutoffs_up",
    "avg_inferences_down",
    "avg_inferences_up",
    "pseudocost_variance_down",
    "pseudocost_variance_up",
    "conflicts_applied",
    // open node bounds (12)
    "open_at_min_share",
    "open_at_max_share",
    "reldist_lower_open_max",
    "reldist_open_min_max",
    "reldist_open_min_upper",
    "reldist_open_max_upper",
    "relpos_open_mean",
    "relpos_open_min",
    "relpos_open_max",
    "reldist_open_q1_q3",
    "open_lb_std_over_mean",
    "open_lb_quartile_dispersion",
    // open node depths (4)
    "open_depth_mean_over_max_depth",
    "reldist_open_depth_q1_q3",
    "open_depth_std_over_mean",
    "open_depth_quartile_dispersion",
];

/// Branching-score normalization against an average score:
/// `1 − 1 / (1 + s / max(s_avg, 0.1))`.
pub fn var_score(s: f64, s_avg: f64) -> f64 {
    1.0 - 1.0 / (1.0 + s / s_avg.max(0.1))
}

/// `max(x / (x + 1), 0.1)`.
pub fn g_norm_max(x: f64) -> f64 {
    (x / (x + 1.0)).max(0.1)
}

/// Relative distance; `0` when the signs differ. With exactly one infinite
/// argument the limit value `1` is returned.
pub fn rel_dist(x: f64, y: f64) -> f64 {
    match (x.is_finite(), y.is_finite()) {
        (true, true) => {}
        (false, false) => return 0.0,
        _ => return if x.is_nan() || y.is_nan() { 0.0 } else { 1.0 },
    }
    if x * y < 0.0 {
        return 0.0;
    }
    abs(x - y) / abs(x).max(abs(y)).max(1e-10)
}

/// Relative position `|x − z| / |x − y|` of `z` between `x` and `y`; `0` when
/// `|x − y| ≤ 1e-10`. An infinite `x` with finite `z`, `y` gives the limit `1`.
pub fn rel_pos(z: f64, x: f64, y: f64) -> f64 {
    if x.is_infinite() && z.is_finite() && y.is_finite() {
        return 1.0;
    }
    let den = abs(x - y);
    if !den.is_finite() || den <= 1e-10 || !z.is_finite() {
        return 0.0;
    }
    abs(x - z) / den
}

pub fn safe_ln(x: f64) -> f64 {
    if x > 0.0 && x.is_finite() {
        ln(x)
    } else {
        0.0
    }
}

fn mean(xs: &[f64]) -> f64 {
    safe_div(xs.iter().sum(), xs.len() as f64)
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    sqrt(safe_div(xs.iter().map(|x| (x - m) * (x - m)).sum(), xs.len() as f64))
}

/// Linear-interpolation quantile (inclusive method) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        1 => sorted[0],
        n => {
            let pos = q * (n - 1) as f64;
            let lo = libm::floor(pos) as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = pos - lo as f64;
            sorted[lo] + (sorted[hi] - sorted[lo]) * frac
        }
    }
}

/// The current node as seen by the feature builders.
#[derive(Clone, Copy, Debug)]
pub struct NodeView<'a> {
    pub depth: u64,
    pub lp_objective: f64,
    pub x: &'a [f64],
    /// Variables whose local bounds differ from the root box.
    pub bound_changes: usize,
}

/// Lower bounds and depths of the open nodes (current node excluded).
#[derive(Clone, Copy, Debug)]
pub struct OpenView<'a> {
    pub lower_bounds: &'a [f64],
    pub depths: &'a [f64],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateMatrix {
    /// One 25-vector per candidate, in candidate order.
    pub columns: Vec<[f64; CANDIDATE_DIM]>,
    pub candidates: Vec<usize>,
    pub step: u64,
}

impl CandidateMatrix {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.columns.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// Reorders the columns so new column `i` is old column `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> CandidateMatrix {
        CandidateMatrix {
            columns: perm.iter().map(|&p| self.columns[p]).collect(),
            candidates: perm.iter().map(|&p| self.candidates[p]).collect(),
            step: self.step,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeState {
    pub values: Vec<f64>,
    pub step: u64,
}

impl TreeState {
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

pub fn build_candidate_matrix(node: &NodeView<'_>, candidates: &[usize], stats: &SearchStats, step: u64) -> CandidateMatrix {
    let max_depth = (stats.max_depth as f64).max(1.0);
    let pc = &stats.pseudocosts;
    let total_branchings = stats.branchings as f64;
    let avg_conflict = stats.avg_conflict_score();
    let avg_conflict_len = stats.avg_conflict_length_score();
    let avg_inference = stats.avg_inference_score();
    let avg_cutoff = stats.avg_cutoff_score();
    let avg_pc = stats.avg_pseudocost_score();
    let n_cliques = stats.total_cliques as f64;

    let columns = candidates
        .iter()
        .map(|&j| {
            let x = node.x[j];
            let v = &stats.vars[j];
            let mut c = [0.0; CANDIDATE_DIM];
            c[0] = x;
            c[1] = v.avg_sol(x);
            for (k, d) in Direction::BOTH.into_iter().enumerate() {
                let ds = v.get(d);
                let pc_count = pc.count(j, d) as f64;
                c[2 + k] = 1.0 - stats.var_avg_branch_depth(j, d) / max_depth;
                c[9 + k] = safe_div(pc_count, pc.total_count(d) as f64);
                c[11 + k] = safe_div(pc_count, ds.branchings as f64);
                c[13 + k] = safe_div(pc_count, total_branchings);
                c[15 + k] = ds.implications as f64;
                c[17 + k] = safe_div(ds.cliques as f64, n_cliques);
                c[19 + k] = g_norm_max(stats.var_avg_cutoffs(j, d));
                c[21 + k] = g_norm_max(stats.var_avg_conflict_length(j, d));
                c[23 + k] = g_norm_max(stats.var_avg_inferences(j, d));
            }
            c[4] = var_score(stats.var_conflict_score(j), avg_conflict);
            c[5] = var_score(stats.var_conflict_length_score(j), avg_conflict_len);
            c[6] = var_score(stats.var_inference_score(j), avg_inference);
            c[7] = var_score(stats.var_cutoff_score(j), avg_cutoff);
            c[8] = var_score(stats.var_pseudocost_score(j, x), avg_pc);
            for value in c.iter_mut() {
                if !value.is_finite() {
                    *value = 0.0;
                }
            }
            c
        })
        .collect();
    CandidateMatrix { columns, candidates: candidates.to_vec(), step }
}

pub fn build_tree_state(
    stats: &SearchStats,
    node: &NodeView<'_>,
    n_candidates: usize,
    open: &OpenView<'_>,
    step: u64,
) -> TreeState {
    let mut t = Vec::with_capacity(TREE_DIM);
    let nodes = stats.processed as f64;
    let max_depth = (stats.max_depth as f64).max(1.0);
    let lower = stats.global_lower;
    let upper = stats.upper_bound();
    let root_lower = stats.root_lower.unwrap_or(node.lp_objective);
    let lp = node.lp_objective;
    let leaves = stats.leaves() as f64;

    // current node
    t.push(node.depth as f64 / max_depth);
    t.push(safe_div(stats.plunge_depth as f64, node.depth as f64));
    t.push(rel_dist(lower, lp));
    t.push(rel_dist(root_lower, lp));
    t.push(rel_dist(upper, lp));
    t.push(rel_pos(lp, upper, lower));
    t.push(safe_div(n_candidates as f64, stats.n_discrete as f64));
    t.push(safe_div(node.bound_changes as f64, stats.n_vars as f64));

    // nodes and leaves
    t.push(safe_div(stats.leaves_objlimit as f64, leaves));
    t.push(safe_div(stats.leaves_infeasible as f64, leaves));
    t.push(safe_div(stats.leaves_feasible as f64, leaves));
    t.push((stats.leaves_infeasible as f64 + 1.0) / (stats.leaves_objlimit as f64 + 1.0));
    t.push(safe_div(open.lower_bounds.len() as f64, nodes));
    t.push(safe_div(leaves, nodes));
    t.push(safe_div(stats.internal as f64, nodes));
    t.push(safe_div(nodes, stats.created as f64));

    // depth and backtracks
    t.push(safe_div(stats.activated as f64, nodes));
    t.push(safe_div(stats.deactivated as f64, nodes));
    t.push(stats.plunge_depth as f64 / max_depth);
    t.push(safe_div(stats.backtracks as f64, nodes));

    // lp iterations
    t.push(safe_ln(safe_div(stats.lp_iterations as f64, nodes)));
    t.push(safe_ln(safe_div(stats.lp_solves as f64, nodes)));
    t.push(safe_div(nodes, stats.lp_solves as f64));
    t.push(safe_div(stats.node_lps as f64, stats.lp_solves as f64));

    // gap
    let gap = primal_dual_gap(upper, lower);
    let first = stats.first_sol_gap.unwrap_or(0.0);
    let last = stats.last_sol_gap.unwrap_or(0.0);
    t.push(safe_ln(stats.primal_dual_integral));
    t.push(safe_div(gap, last));
    t.push(safe_div(gap, first));
    t.push(safe_div(last, first));

    // bounds and solutions
    let avg_lower = if open.lower_bounds.is_empty() { lower } else { mean(open.lower_bounds) };
    t.push(rel_dist(root_lower, lower));
    t.push(rel_dist(root_lower, avg_lower));
    t.push(rel_dist(upper, lower));
    t.push(if stats.upper_is_solution() { 1.0 } else { 0.0 });
    t.push(safe_div(stats.nodes_before_first.unwrap_or(0) as f64, nodes));

    // average scores
    t.push(g_norm_max(stats.avg_conflict_score()));
    t.push(g_norm_max(stats.avg_conflict_length_score()));
    t.push(g_norm_max(stats.avg_inference_score()));
    t.push(g_norm_max(stats.avg_cutoff_score()));
    t.push(g_norm_max(stats.avg_pseudocost_score()));
    t.push(g_norm_max(stats.avg_cutoffs(Direction::Down)));
    t.push(g_norm_max(stats.avg_cutoffs(Direction::Up)));
    t.push(g_norm_max(stats.avg_inferences(Direction::Down)));
    t.push(g_norm_max(stats.avg_inferences(Direction::Up)));
    t.push(g_norm_max(stats.pseudocosts.global_variance(Direction::Down)));
    t.push(g_norm_max(stats.pseudocosts.global_variance(Direction::Up)));
    t.push(g_norm_max(stats.conflicts_applied as f64));

    // open nodes
    push_open_features(&mut t, open, lower, upper, max_depth);

    for v in t.iter_mut() {
        if !v.is_finite() {
            *v = 0.0;
        }
    }
    debug_assert_eq!(t.len(), TREE_DIM);
    TreeState { values: t, step }
}

fn push_open_features(t: &mut Vec<f64>, open: &OpenView<'_>, lower: f64, upper: f64, max_depth: f64) {
    let n = open.lower_bounds.len();
    if n < 2 {
        let at_extreme = if n == 1 { 1.0 } else { 0.0 };
        t.push(at_extreme);
        t.push(at_extreme);
        t.extend(core::iter::repeat_n(0.0, 14));
        return;
    }
    let mut lbs = open.lower_bounds.to_vec();
    lbs.sort_by(f64::total_cmp);
    let (min, max) = (lbs[0], lbs[n - 1]);
    let count_near = |v: f64| lbs.iter().filter(|&&x| abs(x - v) <= 1e-9).count() as f64;
    let (q1, q3) = (quantile_sorted(&lbs, 0.25), quantile_sorted(&lbs, 0.75));
    let m = mean(&lbs);
    t.push(count_near(min) / n as f64);
    t.push(count_near(max) / n as f64);
    t.push(rel_dist(lower, max));
    t.push(rel_dist(min, max));
    t.push(rel_dist(min, upper));
    t.push(rel_dist(max, upper));
    t.push(rel_pos(m, upper, lower));
    t.push(rel_pos(min, upper, lower));
    t.push(rel_pos(max, upper, lower));
    t.push(rel_dist(q1, q3));
    t.push(safe_div(std_dev(&lbs), m));
    t.push(safe_div(q3 - q1, q3 + q1));

    let mut ds = open.depths.to_vec();
    ds.sort_by(f64::total_cmp);
    let (d1, d3) = (quantile_sorted(&ds, 0.25), quantile_sorted(&ds, 0.75));
    let dm = mean(&ds);
    t.push(dm / max_depth);
    t.push(rel_dist(d1, d3));
    t.push(safe_div(std_dev(&ds), dm));
    t.push(safe_div(d3 - d1, d3 + d1));
}

/// A feature value outside its documented range.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{name} = {value} outside [{lo}, {hi}]")]
pub struct RangeError {
    pub name: &'static str,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

fn candidate_range(row: usize) -> Option<(f64, f64, bool)> {
    // (lo, hi, hi inclusive)
    match row {
        2..=3 | 9..=10 => Some((0.0, 1.0, true)),
        4..=8 => Some((0.0, 1.0, false)),
        19..=24 => Some((0.1, 1.0, false)),
        _ => None,
    }
}

fn tree_range(name: &str) -> Option<(f64, f64, bool)> {
    if name.starts_with("reldist_") {
        Some((0.0, 2.0, true))
    } else if name.ends_with("_share") || name == "upper_is_solution" {
        Some((0.0, 1.0, true))
    } else if name.starts_with("avg_") || name.starts_with("pseudocost_variance") || name == "conflicts_applied" {
        Some((0.1, 1.0, false))
    } else if name.starts_with("relpos_") {
        Some((0.0, f64::INFINITY, true))
    } else {
        None
    }
}

fn check(name: &'static str, value: f64, range: Option<(f64, f64, bool)>) -> Result<(), RangeError> {
    let Some((lo, hi, inclusive)) = range else {
        return if value.is_finite() { Ok(()) } else { Err(RangeError { name, value, lo: f64::MIN, hi: f64::MAX }) };
    };
    let ok = value >= lo && if inclusive { value <= hi } else { value < hi };
    if ok {
        Ok(())
    } else {
        Err(RangeError { name, value, lo, hi })
    }
}

/// Checks shapes, finiteness and the bounded-range features of one
/// branching state.
pub fn check_ranges(matrix: &CandidateMatrix, tree: &TreeState) -> Result<(), RangeError> {
    for col in &matrix.columns {
        for (row, &v) in col.iter().enumerate() {
            check(CANDIDATE_FEATURES[row], v, candidate_range(row))?;
        }
    }
    if tree.values.len() != TREE_DIM {
        return Err(RangeError { name: "tree_len", value: tree.values.len() as f64, lo: 61.0, hi: 61.0 });
    }
    for (i, &v) in tree.values.iter().enumerate() {
        check(TREE_FEATURES[i], v, tree_range(TREE_FEATURES[i]))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn var_score_examples() {
        assert_eq!(var_score(0.1, 0.1), 0.5);
        assert_eq!(var_score(0.0, 7.0), 0.0);
        assert!((var_score(0.3, 0.05) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn g_norm_max_examples() {
        assert_eq!(g_norm_max(0.0), 0.1);
        assert_eq!(g_norm_max(1.0), 0.5);
        assert_eq!(g_norm_max(9.0), 0.9);
    }

    #[test]
    fn rel_dist_examples() {
        assert_eq!(rel_dist(1.0, -1.0), 0.0);
        assert_eq!(rel_dist(0.0, 0.0), 0.0);
        assert_eq!(rel_dist(2.0, 4.0), 0.5);
        assert_eq!(rel_dist(f64::INFINITY, 3.0), 1.0);
    }

    #[test]
    fn rel_pos_examples() {
        assert_eq!(rel_pos(5.0, 0.0, 10.0), 0.5);
        assert_eq!(rel_pos(0.0, 0.0, 10.0), 0.0);
        assert_eq!(rel_pos(10.0, 0.0, 10.0), 1.0);
        assert_eq!(rel_pos(3.0, 2.0, 2.0), 0.0);
    }

    #[test]
    fn inclusive_quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.25), 1.75);
        assert_eq!(quantile_sorted(&xs, 0.75), 3.25);
        assert_eq!(quantile_sorted(&[2.0, 4.0], 0.5), 3.0);
    }

    #[test]
    fn names_cover_layout() {
        assert_eq!(CANDIDATE_FEATURES.len(), 25);
        assert_eq!(TREE_FEATURES.len(), 61);
    }

    fn stats_for_tree() -> SearchStats {
        let mut s = SearchStats::new(4, 4, Some(10.0));
        s.global_lower = 2.0;
        s.root_lower = Some(2.0);
        s.processed = 5;
        s.created = 7;
        s.max_depth = 10;
        s
    }

    #[test]
    fn tree_state_hand_values() {
        let s = stats_for_tree();
        let x = [0.5, 1.0, 0.0, 0.0];
        let node = NodeView { depth: 3, lp_objective: 2.0, x: &x, bound_changes: 2 };
        let lbs = [2.0, 4.0];
        let ds = [2.0, 3.0];
        let tree = build_tree_state(&s, &node, 1, &OpenView { lower_bounds: &lbs, depths: &ds }, 0);
        assert_eq!(tree.values.len(), TREE_DIM);
        assert!((tree.values[0] - 0.3).abs() < 1e-15);
        let relpos_mean = TREE_FEATURES.iter().position(|&n| n == "relpos_open_mean").unwrap();
        assert!((tree.values[relpos_mean] - 0.875).abs() < 1e-15);
        assert!(tree.is_finite());
    }

    #[test]
    fn constant_open_bounds_have_no_dispersion() {
        let s = stats_for_tree();
        let x = [0.5];
        let node = NodeView { depth: 1, lp_objective: 2.0, x: &x, bound_changes: 0 };
        let lbs = [3.0, 3.0, 3.0];
        let ds = [1.0, 1.0, 1.0];
        let tree = build_tree_state(&s, &node, 1, &OpenView { lower_bounds: &lbs, depths: &ds }, 0);
        let at = |name: &str| tree.values[TREE_FEATURES.iter().position(|&n| n == name).unwrap()];
        assert_eq!(at("open_lb_std_over_mean"), 0.0);
        assert_eq!(at("reldist_open_q1_q3"), 0.0);
        assert_eq!(at("open_at_min_share"), 1.0);
    }

    #[test]
    fn single_open_node_rules() {
        let s = stats_for_tree();
        let x = [0.5];
        let node = NodeView { depth: 1, lp_objective: 2.0, x: &x, bound_changes: 0 };
        let tree = build_tree_state(&s, &node, 1, &OpenView { lower_bounds: &[3.0], depths: &[1.0] }, 0);
        let open = &tree.values[45..];
        assert_eq!(open.len(), 16);
        assert_eq!(&open[..2], &[1.0, 1.0]);
        assert!(open[2..].iter().all(|&v| v == 0.0));
        let none = build_tree_state(&s, &node, 1, &OpenView { lower_bounds: &[], depths: &[] }, 0);
        assert!(none.values[45..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fresh_candidate_columns_use_zero_input_values() {
        let s = SearchStats::new(3, 3, None);
        let x = [0.5, 0.2, 1.7];
        let node = NodeView { depth: 0, lp_objective: -1.0, x: &x, bound_changes: 0 };
        let m = build_candidate_matrix(&node, &[0, 2], &s, 0);
        for col in &m.columns {
            assert!(col[4..9].iter().all(|&v| v == 0.0));
            assert!(col[19..25].iter().all(|&v| v == 0.1));
        }
        assert_eq!(m.columns[0][0], 0.5);
        assert_eq!(m.candidates, vec![0, 2]);
    }
}
