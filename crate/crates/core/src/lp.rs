//! Bounded-variable revised simplex with a dense explicit basis inverse.
//!
//! Every row `i` gets a logical variable `s_i = a_i·x` whose bounds encode the
//! row sense, so the system is `[A | −I] (x, s) = 0` and the all-logical basis
//! is always available. Infeasible starting bases (cold or warm) go through a
//! composite phase 1 that minimizes the sum of bound violations of the basic
//! variables while never letting a feasible basic variable become infeasible.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::milp::{MilpInstance, Sense, BOUND_TOL, ROW_TOL};
use crate::num::abs;

/// Largest row count accepted by the dense factorization.
pub const MAX_ROWS: usize = 500;
const REFACTOR_EVERY: usize = 50;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable (both bounds infinite) held at its value.
    Free,
}

/// A simplex basis over the `n + m` structural and logical variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub head: Vec<usize>,
    pub status: Vec<VarStatus>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub objective: f64,
    /// Structural values (length `n`); meaningful when optimal.
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final basis, usable as a warm-start hint.
    pub basis: Option<Basis>,
    /// Reduced costs of all `n + m` variables at the final basis (phase 2
    /// costs); zero for basic variables.
    pub reduced_costs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("lp has {rows} rows; the dense solver accepts fewer than {MAX_ROWS}")]
    TooLarge { rows: usize },
    #[error("bound vectors have length {got}, expected {expected}")]
    BoundLength { got: usize, expected: usize },
    #[error("basis matrix is singular (pivot {pivot:e} in column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("numerical failure after Bland fallback: max row violation {row_violation:e}, max bound violation {bound_violation:e}, {iterations} iterations")]
    Numerical { row_violation: f64, bound_violation: f64, iterations: usize },
}

/// Reusable LP context for one instance; only variable bounds change between
/// solves.
#[derive(Clone, Debug)]
pub struct LpSolver {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    rows: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    row_lower: Vec<f64>,
    row_upper: Vec<f64>,
    pub max_iterations: usize,
}

impl LpSolver {
    pub fn new(inst: &MilpInstance) -> Result<Self, LpError> {
        let m = inst.num_conss();
        if m >= MAX_ROWS {
            return Err(LpError::TooLarge { rows: m });
        }
        let n = inst.num_vars();
        let mut cols = vec![Vec::new(); n];
        let mut rows = Vec::with_capacity(m);
        let mut row_lower = Vec::with_capacity(m);
        let mut row_upper = Vec::with_capacity(m);
        for (i, r) in inst.rows.iter().enumerate() {
            let mut row = Vec::with_capacity(r.coefs.len());
            for &(j, a) in &r.coefs {
                if a != 0.0 {
                    cols[j].push((i, a));
                    row.push((j, a));
                }
            }
            rows.push(row);
            let (lo, hi) = match r.sense {
                Sense::Le => (f64::NEG_INFINITY, r.rhs),
                Sense::Ge => (r.rhs, f64::INFINITY),
                Sense::Eq => (r.rhs, r.rhs),
            };
            row_lower.push(lo);
            row_upper.push(hi);
        }
        Ok(LpSolver {
            n,
            m,
            cols,
            rows,
            cost: inst.objective.clone(),
            row_lower,
            row_upper,
            max_iterations: 20_000,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    /// Solves the relaxation under the given structural bounds. A basis hint
    /// only changes the starting point.
    pub fn solve(&self, lower: &[f64], upper: &[f64], hint: Option<&Basis>) -> Result<LpResult, LpError> {
        for len in [lower.len(), upper.len()] {
            if len != self.n {
                return Err(LpError::BoundLength { got: len, expected: self.n });
            }
        }
        if (0..self.n).any(|j| lower[j] > upper[j] + BOUND_TOL) {
            return Ok(LpResult {
                status: LpStatus::Infeasible,
                objective: f64::INFINITY,
                x: Vec::new(),
                iterations: 0,
                basis: None,
                reduced_costs: Vec::new(),
            });
        }
        let mut run = Run::new(self, lower, upper, hint)?;
        match run.iterate(false) {
            Ok(res) if res.status != LpStatus::Optimal || self.verify(&res.x, lower, upper) => Ok(res),
            first => {
                // retry from the logical basis under Bland's rule
                let spent = first.as_ref().map(|r| r.iterations).unwrap_or(0);
                let mut run = Run::new(self, lower, upper, None)?;
                let mut res = run.iterate(true)?;
                res.iterations += spent;
                if res.status == LpStatus::Optimal && !self.verify(&res.x, lower, upper) {
                    let (row_violation, bound_violation) = self.violations(&res.x, lower, upper);
                    return Err(LpError::Numerical { row_violation, bound_violation, iterations: res.iterations });
                }
                Ok(res)
            }
        }
    }

    fn violations(&self, x: &[f64], lower: &[f64], upper: &[f64]) -> (f64, f64) {
        let mut row_v: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let act: f64 = row.iter().map(|&(j, a)| a * x[j]).sum();
            row_v = row_v.max(self.row_lower[i] - act).max(act - self.row_upper[i]);
        }
        let mut bnd_v: f64 = 0.0;
        for j in 0..self.n {
            bnd_v = bnd_v.max(lower[j] - x[j]).max(x[j] - upper[j]);
        }
        (row_v, bnd_v)
    }

    fn verify(&self, x: &[f64], lower: &[f64], upper: &[f64]) -> bool {
        let (r, b) = self.violations(x, lower, upper);
        r <= ROW_TOL && b <= BOUND_TOL
    }
}

/// Convenience wrapper building a fresh context.
pub fn solve_lp(inst: &MilpInstance, lower: &[f64], upper: &[f64], hint: Option<&Basis>) -> Result<LpResult, LpError> {
    LpSolver::new(inst)?.solve(lower, upper, hint)
}

struct Run<'a> {
    lp: &'a LpSolver,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    head: Vec<usize>,
    status: Vec<VarStatus>,
    /// Row-major `m × m` explicit inverse of the basis matrix.
    binv: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
}

impl<'a> Run<'a> {
    fn new(lp: &'a LpSolver, lower: &[f64], upper: &[f64], hint: Option<&Basis>) -> Result<Self, LpError> {
        let (n, m) = (lp.n, lp.m);
        let mut lo = Vec::with_capacity(n + m);
        let mut hi = Vec::with_capacity(n + m);
        lo.extend_from_slice(lower);
        hi.extend_from_slice(upper);
        lo.extend_from_slice(&lp.row_lower);
        hi.extend_from_slice(&lp.row_upper);
        let mut run = Run {
            lp,
            lo,
            hi,
            x: vec![0.0; n + m],
            head: Vec::new(),
            status: Vec::new(),
            binv: vec![0.0; m * m],
            since_refactor: 0,
            iterations: 0,
        };
        let usable = hint.filter(|h| h.head.len() == m && h.status.len() == n + m);
        if let Some(h) = usable {
            run.head = h.head.clone();
            run.status = h.status.clone();
            run.sanitize_nonbasic();
            if run.refactor().is_ok() {
                run.recompute_basics();
                return Ok(run);
            }
        }
        run.head = (n..n + m).collect();
        run.status = vec![VarStatus::Basic; n + m];
        for j in 0..n {
            run.status[j] = VarStatus::AtLower;
        }
        run.sanitize_nonbasic();
        run.refactor()?;
        run.recompute_basics();
        Ok(run)
    }

    /// Places every nonbasic variable on a finite bound compatible with its
    /// status, or marks it free.
    fn sanitize_nonbasic(&mut self) {
        for j in 0..self.status.len() {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let (l, u) = (self.lo[j], self.hi[j]);
            let st = match self.status[j] {
                VarStatus::AtUpper if u.is_finite() => VarStatus::AtUpper,
                _ if l.is_finite() => VarStatus::AtLower,
                _ if u.is_finite() => VarStatus::AtUpper,
                _ => VarStatus::Free,
            };
            self.status[j] = st;
            self.x[j] = match st {
                VarStatus::AtLower => l,
                VarStatus::AtUpper => u,
                _ => 0.0,
            };
        }
        // basic flags must agree with the head
        let mut in_head = vec![false; self.status.len()];
        for &b in &self.head {
            if b < in_head.len() {
                in_head[b] = true;
            }
        }
        for j in 0..self.status.len() {
            if self.status[j] == VarStatus::Basic && !in_head[j] {
                self.status[j] = VarStatus::AtLower;
                self.x[j] = if self.lo[j].is_finite() { self.lo[j] } else { 0.0 };
            }
        }
    }

    fn column(&self, j: usize) -> ColumnRef<'_> {
        if j < self.lp.n {
            ColumnRef::Sparse(&self.lp.cols[j])
        } else {
            ColumnRef::Logical(j - self.lp.n)
        }
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.lp.m;
        if self.head.len() != m || self.head.iter().any(|&j| j >= self.lp.n + m) {
            return Err(LpError::Singular { column: 0, pivot: 0.0 });
        }
        // augmented [B | I] Gauss-Jordan with partial pivoting
        let w = 2 * m;
        let mut aug = vec![0.0; m * w];
        for (k, &j) in self.head.iter().enumerate() {
            match self.column(j) {
                ColumnRef::Sparse(col) => {
                    for &(i, a) in col {
                        aug[i * w + k] = a;
                    }
                }
                ColumnRef::Logical(i) => aug[i * w + k] = -1.0,
            }
        }
        for i in 0..m {
            aug[i * w + m + i] = 1.0;
        }
        for c in 0..m {
            let mut p = c;
            let mut best = abs(aug[c * w + c]);
            for r in c + 1..m {
                let v = abs(aug[r * w + c]);
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < SINGULAR_TOL {
                return Err(LpError::Singular { column: self.head[c], pivot: best });
            }
            if p != c {
                for k in 0..w {
                    aug.swap(c * w + k, p * w + k);
                }
            }
            let inv = 1.0 / aug[c * w + c];
            for k in 0..w {
                aug[c * w + k] *= inv;
            }
            for r in 0..m {
                if r != c {
                    let f = aug[r * w + c];
                    if f != 0.0 {
                        for k in 0..w {
                            aug[r * w + k] -= f * aug[c * w + k];
                        }
                    }
                }
            }
        }
        for i in 0..m {
            self.binv[i * m..(i + 1) * m].copy_from_slice(&aug[i * w + m..i * w + w]);
        }
        self.since_refactor = 0;
        Ok(())
    }

    /// `x_B = B⁻¹ (−N x_N)`.
    fn recompute_basics(&mut self) {
        let m = self.lp.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.status.len() {
            if self.status[j] == VarStatus::Basic || self.x[j] == 0.0 {
                continue;
            }
            let v = self.x[j];
            match self.column(j) {
                ColumnRef::Sparse(col) => {
                    for &(i, a) in col {
                        rhs[i] -= a * v;
                    }
                }
                ColumnRef::Logical(i) => rhs[i] += v,
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            self.x[self.head[r]] = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.lp.m;
        let mut out = vec![0.0; m];
        match self.column(j) {
            ColumnRef::Sparse(col) => {
                for &(i, a) in col {
                    for (r, o) in out.iter_mut().enumerate() {
                        *o += self.binv[r * m + i] * a;
                    }
                }
            }
            ColumnRef::Logical(i) => {
                for (r, o) in out.iter_mut().enumerate() {
                    *o = -self.binv[r * m + i];
                }
            }
        }
        out
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - PRIMAL_TOL {
            self.lo[j] - v
        } else if v > self.hi[j] + PRIMAL_TOL {
            v - self.hi[j]
        } else {
            0.0
        }
    }

    fn phase_cost(&self, j: usize, phase_one: bool) -> f64 {
        if phase_one {
            let v = self.x[j];
            if v < self.lo[j] - PRIMAL_TOL {
                -1.0
            } else if v > self.hi[j] + PRIMAL_TOL {
                1.0
            } else {
                0.0
            }
        } else if j < self.lp.n {
            self.lp.cost[j]
        } else {
            0.0
        }
    }

    fn reduced_costs(&self, phase_one: bool) -> Vec<f64> {
        let (n, m) = (self.lp.n, self.lp.m);
        let mut cb = vec![0.0; m];
        for r in 0..m {
            cb[r] = self.phase_cost(self.head[r], phase_one);
        }
        let mut y = vec![0.0; m];
        for r in 0..m {
            if cb[r] != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yi, b) in y.iter_mut().zip(row) {
                    *yi += cb[r] * b;
                }
            }
        }
        let mut d = vec![0.0; n + m];
        for j in 0..n + m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let c = self.phase_cost(j, phase_one);
            d[j] = match self.column(j) {
                ColumnRef::Sparse(col) => c - col.iter().map(|&(i, a)| y[i] * a).sum::<f64>(),
                ColumnRef::Logical(i) => c + y[i],
            };
        }
        d
    }

    fn phase_objective(&self, phase_one: bool) -> f64 {
        if phase_one {
            self.head.iter().map(|&j| self.infeasibility(j)).sum()
        } else {
            (0..self.lp.n).map(|j| self.lp.cost[j] * self.x[j]).sum()
        }
    }

    fn iterate(&mut self, bland_from_start: bool) -> Result<LpResult, LpError> {
        let (n, m) = (self.lp.n, self.lp.m);
        let mut bland = bland_from_start;
        let stall_limit = 2 * (n + m);
        let mut stall = 0usize;
        let mut last_obj = f64::INFINITY;
        let mut last_phase_one = true;
        loop {
            let phase_one = self.head.iter().any(|&j| self.infeasibility(j) > 0.0);
            let obj = self.phase_objective(phase_one);
            if phase_one != last_phase_one {
                stall = 0;
                last_obj = f64::INFINITY;
                last_phase_one = phase_one;
            }
            if obj < last_obj - 1e-12 {
                stall = 0;
                last_obj = obj;
            } else {
                stall += 1;
                if stall > stall_limit {
                    bland = true;
                }
            }

            let d = self.reduced_costs(phase_one);
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..n + m {
                if self.lo[j] == self.hi[j] && self.status[j] != VarStatus::Basic {
                    continue;
                }
                let dir = match self.status[j] {
                    VarStatus::Basic => continue,
                    VarStatus::AtLower if d[j] < -DUAL_TOL => 1.0,
                    VarStatus::AtUpper if d[j] > DUAL_TOL => -1.0,
                    VarStatus::Free if abs(d[j]) > DUAL_TOL => if d[j] < 0.0 { 1.0 } else { -1.0 },
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if abs(d[j]) > best {
                    best = abs(d[j]);
                    entering = Some((j, dir));
                }
            }
            let Some((q, sigma)) = entering else {
                let status = if phase_one { LpStatus::Infeasible } else { LpStatus::Optimal };
                return Ok(self.finish(status));
            };
            if self.iterations >= self.lp.max_iterations {
                return Ok(self.finish(LpStatus::IterationLimit));
            }
            self.iterations += 1;

            let alpha = self.ftran(q);
            let mut theta = f64::INFINITY;
            let mut leave: Option<(usize, bool)> = None; // (position, leaves at upper)
            let mut leave_pivot = 0.0;
            if self.lo[q].is_finite() && self.hi[q].is_finite() {
                theta = self.hi[q] - self.lo[q];
            }
            for r in 0..m {
                if abs(alpha[r]) <= PIVOT_TOL {
                    continue;
                }
                let j = self.head[r];
                let delta = -sigma * alpha[r];
                let v = self.x[j];
                let (l, u) = (self.lo[j], self.hi[j]);
                let below = v < l - PRIMAL_TOL;
                let above = v > u + PRIMAL_TOL;
                let (ratio, at_upper) = if delta > 0.0 {
                    if below {
                        ((l - v) / delta, false)
                    } else if above || !u.is_finite() {
                        continue;
                    } else {
                        ((u - v).max(0.0) / delta, true)
                    }
                } else if above {
                    ((v - u) / -delta, true)
                } else if below || !l.is_finite() {
                    continue;
                } else {
                    ((v - l).max(0.0) / -delta, false)
                };
                let better = if ratio < theta - 1e-12 {
                    true
                } else if ratio <= theta + 1e-12 {
                    match leave {
                        // ties with the entering bound flip keep the flip
                        None => false,
                        Some((r0, _)) if bland => j < self.head[r0],
                        Some(_) => abs(alpha[r]) > leave_pivot,
                    }
                } else {
                    false
                };
                if better {
                    theta = ratio;
                    leave = Some((r, at_upper));
                    leave_pivot = abs(alpha[r]);
                }
            }
            if !theta.is_finite() {
                if phase_one {
                    return Err(LpError::Numerical {
                        row_violation: f64::INFINITY,
                        bound_violation: f64::INFINITY,
                        iterations: self.iterations,
                    });
                }
                return Ok(self.finish(LpStatus::Unbounded));
            }

            // move
            self.x[q] += sigma * theta;
            for r in 0..m {
                if alpha[r] != 0.0 {
                    let j = self.head[r];
                    self.x[j] -= sigma * theta * alpha[r];
                }
            }
            match leave {
                None => {
                    // bound flip of the entering variable
                    self.status[q] = if sigma > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                    self.x[q] = if sigma > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Some((r, at_upper)) => {
                    let j = self.head[r];
                    self.status[j] = if at_upper { VarStatus::AtUpper } else { VarStatus::AtLower };
                    self.x[j] = if at_upper { self.hi[j] } else { self.lo[j] };
                    self.status[q] = VarStatus::Basic;
                    self.head[r] = q;
                    self.pivot(r, &alpha);
                    self.since_refactor += 1;
                    if self.since_refactor >= REFACTOR_EVERY {
                        self.refactor()?;
                        self.recompute_basics();
                    }
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.lp.m;
        let inv = 1.0 / alpha[r];
        for k in 0..m {
            self.binv[r * m + k] *= inv;
        }
        for i in 0..m {
            if i != r && alpha[i] != 0.0 {
                let f = alpha[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
            }
        }
    }

    fn finish(&mut self, status: LpStatus) -> LpResult {
        let n = self.lp.n;
        if status == LpStatus::Optimal && self.since_refactor > 0 && self.refactor().is_ok() {
            self.recompute_basics();
        }
        let mut x: Vec<f64> = self.x[..n].to_vec();
        if status == LpStatus::Optimal {
            for j in 0..n {
                // snap sub-tolerance bound excursions of basic variables
                if x[j] < self.lo[j] && x[j] >= self.lo[j] - 1e-7 {
                    x[j] = self.lo[j];
                } else if x[j] > self.hi[j] && x[j] <= self.hi[j] + 1e-7 {
                    x[j] = self.hi[j];
                }
            }
        }
        let objective = match status {
            LpStatus::Optimal | LpStatus::IterationLimit => (0..n).map(|j| self.lp.cost[j] * x[j]).sum(),
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
        };
        let reduced_costs = if status == LpStatus::Optimal { self.reduced_costs(false) } else { Vec::new() };
        LpResult {
            status,
            objective,
            x,
            iterations: self.iterations,
            basis: Some(Basis { head: self.head.clone(), status: self.status.clone() }),
            reduced_costs,
        }
    }
}

enum ColumnRef<'a> {
    Sparse(&'a [(usize, f64)]),
    Logical(usize),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{toy_instance, Constraint};

    fn single_var() -> MilpInstance {
        MilpInstance::new("one", vec![-1.0], vec![Constraint { coefs: vec![(0, 1.0)], sense: Sense::Le, rhs: 3.0 }], [0])
            .unwrap()
    }

    #[test]
    fn single_variable_hits_row_bound() {
        let inst = single_var();
        let res = solve_lp(&inst, &inst.lower, &inst.upper, None).unwrap();
        assert_eq!(res.status, LpStatus::Optimal);
        assert!((res.objective + 3.0).abs() < 1e-12);
        assert!((res.x[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_box_is_infeasible() {
        let inst = toy_instance();
        let res = solve_lp(&inst, &[2.0, 0.0], &[1.0, 1.0], None).unwrap();
        assert_eq!(res.status, LpStatus::Infeasible);
    }

    #[test]
    fn toy_relaxation_lands_on_facet() {
        let inst = toy_instance();
        let res = solve_lp(&inst, &inst.lower, &inst.upper, None).unwrap();
        assert_eq!(res.status, LpStatus::Optimal);
        assert!((res.objective + 1.5).abs() < 1e-12);
        assert!((res.x[0] + res.x[1] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows_need_phase_one() {
        // min x0 + 2 x1, x0 + x1 = 4, x0 - x1 >= 1, x in [0, 10]
        let inst = MilpInstance::new(
            "eq",
            vec![1.0, 2.0],
            vec![
                Constraint { coefs: vec![(0, 1.0), (1, 1.0)], sense: Sense::Eq, rhs: 4.0 },
                Constraint { coefs: vec![(0, 1.0), (1, -1.0)], sense: Sense::Ge, rhs: 1.0 },
            ],
            [0],
        )
        .unwrap()
        .with_bounds(vec![0.0, 0.0], vec![10.0, 10.0])
        .unwrap();
        let res = solve_lp(&inst, &inst.lower, &inst.upper, None).unwrap();
        assert_eq!(res.status, LpStatus::Optimal);
        assert!((res.objective - 4.0).abs() < 1e-9, "{}", res.objective);
    }

    #[test]
    fn infeasible_rows_detected() {
        let inst = MilpInstance::new(
            "inf",
            vec![1.0],
            vec![
                Constraint { coefs: vec![(0, 1.0)], sense: Sense::Ge, rhs: 2.0 },
                Constraint { coefs: vec![(0, 1.0)], sense: Sense::Le, rhs: 1.0 },
            ],
            [0],
        )
        .unwrap();
        let res = solve_lp(&inst, &inst.lower, &inst.upper, None).unwrap();
        assert_eq!(res.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let inst = MilpInstance::new(
            "unb",
            vec![-1.0, 0.0],
            vec![Constraint { coefs: vec![(0, 1.0), (1, -1.0)], sense: Sense::Le, rhs: 1.0 }],
            [0],
        )
        .unwrap();
        let res = solve_lp(&inst, &inst.lower, &inst.upper, None).unwrap();
        assert_eq!(res.status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variable_supported() {
        // min y, y >= x - 3, y >= -x + 1, x in [0, 10], y free -> y = -1 at x = 2
        let inst = MilpInstance::new(
            "free",
            vec![0.0, 1.0],
            vec![
                Constraint { coefs: vec![(1, 1.0), (0, -1.0)], sense: Sense::Ge, rhs: -3.0 },
                Constraint { coefs: vec![(1, 1.0), (0, 1.0)], sense: Sense::Ge, rhs: 1.0 },
            ],
            [0],
        )
        .unwrap()
        .with_bounds(vec![0.0, f64::NEG_INFINITY], vec![10.0, f64::INFINITY])
        .unwrap();
        let res = solve_lp(&inst, &inst.lower, &inst.upper, None).unwrap();
        assert_eq!(res.status, LpStatus::Optimal);
        assert!((res.objective + 1.0).abs() < 1e-9);
    }

    #[test]
    fn too_many_rows_refused() {
        let rows = (0..MAX_ROWS).map(|_| Constraint { coefs: vec![(0, 1.0)], sense: Sense::Le, rhs: 1.0 }).collect();
        let inst = MilpInstance::new("big", vec![1.0], rows, [0]).unwrap();
        assert_eq!(LpSolver::new(&inst).unwrap_err(), LpError::TooLarge { rows: MAX_ROWS });
    }
}
