//! Mixed-integer linear programs: `min c·x` subject to sparse rows with
//! per-row senses, variable bounds and an integrality set.

mod generate;
mod oracle;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::num::serde_f64;

pub use generate::{benchmark_suite, generate_instance, oracle_suite, Family, GenerateError};
pub use oracle::{brute_force_optimum, OracleError, OracleOutcome, DEFAULT_BOX_LIMIT};

/// Row feasibility tolerance shared by the LP and the instance checks.
pub const ROW_TOL: f64 = 1e-7;
/// Bound feasibility tolerance.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

/// One sparse row `Σ coef·x sense rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Signed violation of the row at `x` (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => crate::num::abs(act - self.rhs),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("instance `{0}` has no integer variables")]
    NoIntegers(String),
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("non-finite coefficient in row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("non-finite value in {0}")]
    NonFiniteData(&'static str),
    #[error("row {0} has no nonzero entries")]
    EmptyRow(usize),
    #[error("column index {col} out of range in row {row}")]
    ColumnOutOfRange { row: usize, col: usize },
    #[error("variable {0} has lower bound above upper bound")]
    InvertedBounds(usize),
    #[error("integer index {0} out of range")]
    IntegerOutOfRange(usize),
    #[error("duplicate instance name `{0}`")]
    DuplicateName(String),
}

/// A MILP in minimization form. Maximization inputs are stored with a negated
/// objective and `negated_objective = true`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilpInstance {
    pub name: String,
    pub objective: Vec<f64>,
    pub rows: Vec<Constraint>,
    /// Sorted, duplicate-free indices of integer variables.
    pub integers: Vec<usize>,
    #[serde(with = "serde_f64::vec")]
    pub lower: Vec<f64>,
    #[serde(with = "serde_f64::vec")]
    pub upper: Vec<f64>,
    #[serde(default)]
    pub known_optimum: Option<f64>,
    #[serde(default)]
    pub negated_objective: bool,
    #[serde(default)]
    pub var_names: Vec<String>,
    #[serde(default)]
    pub row_names: Vec<String>,
}

impl MilpInstance {
    /// Builds an instance with default bounds `[0, +inf)` and checks it.
    pub fn new(
        name: impl Into<String>,
        objective: Vec<f64>,
        rows: Vec<Constraint>,
        integers: impl IntoIterator<Item = usize>,
    ) -> Result<Self, InstanceError> {
        let n = objective.len();
        let set: BTreeSet<usize> = integers.into_iter().collect();
        let inst = MilpInstance {
            name: name.into(),
            objective,
            rows,
            integers: set.into_iter().collect(),
            lower: alloc::vec![0.0; n],
            upper: alloc::vec![f64::INFINITY; n],
            known_optimum: None,
            negated_objective: false,
            var_names: Vec::new(),
            row_names: Vec::new(),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, InstanceError> {
        self.lower = lower;
        self.upper = upper;
        self.validate()?;
        Ok(self)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_conss(&self) -> usize {
        self.rows.len()
    }

    pub fn is_integer(&self, j: usize) -> bool {
        self.integers.binary_search(&j).is_ok()
    }

    pub fn integrality_mask(&self) -> Vec<bool> {
        let mut mask = alloc::vec![false; self.num_vars()];
        for &j in &self.integers {
            mask[j] = true;
        }
        mask
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let n = self.num_vars();
        if self.integers.is_empty() {
            return Err(InstanceError::NoIntegers(self.name.clone()));
        }
        for (what, len) in [("lower", self.lower.len()), ("upper", self.upper.len())] {
            if len != n {
                return Err(InstanceError::LengthMismatch { what, got: len, expected: n });
            }
        }
        if !self.var_names.is_empty() && self.var_names.len() != n {
            return Err(InstanceError::LengthMismatch {
                what: "var_names",
                got: self.var_names.len(),
                expected: n,
            });
        }
        if !self.row_names.is_empty() && self.row_names.len() != self.rows.len() {
            return Err(InstanceError::LengthMismatch {
                what: "row_names",
                got: self.row_names.len(),
                expected: self.rows.len(),
            });
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(InstanceError::NonFiniteData("objective"));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coefs.iter().all(|&(_, a)| a == 0.0) {
                return Err(InstanceError::EmptyRow(i));
            }
            for &(j, a) in &row.coefs {
                if j >= n {
                    return Err(InstanceError::ColumnOutOfRange { row: i, col: j });
                }
                if !a.is_finite() {
                    return Err(InstanceError::NonFinite { row: i, col: j });
                }
            }
            if !row.rhs.is_finite() {
                return Err(InstanceError::NonFiniteData("rhs"));
            }
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(InstanceError::InvertedBounds(j));
            }
        }
        if let Some(&j) = self.integers.iter().find(|&&j| j >= n) {
            return Err(InstanceError::IntegerOutOfRange(j));
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Checks rows (within [`ROW_TOL`]), bounds (within [`BOUND_TOL`]) and
    /// integrality (within the fractionality tolerance).
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        if x.len() != self.num_vars() {
            return false;
        }
        let bounds_ok = (0..x.len())
            .all(|j| x[j] >= self.lower[j] - BOUND_TOL && x[j] <= self.upper[j] + BOUND_TOL);
        let ints_ok = self.integers.iter().all(|&j| !crate::num::is_fractional(x[j]));
        bounds_ok && ints_ok && self.rows.iter().all(|r| r.violation(x) <= ROW_TOL)
    }

    /// Reorders the columns so that new column `i` is old column `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MilpInstance {
        let n = self.num_vars();
        debug_assert_eq!(perm.len(), n);
        let mut inverse = alloc::vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut coefs: Vec<(usize, f64)> = r.coefs.iter().map(|&(j, a)| (inverse[j], a)).collect();
                coefs.sort_by_key(|&(j, _)| j);
                Constraint { coefs, sense: r.sense, rhs: r.rhs }
            })
            .collect();
        let mut integers: Vec<usize> = self.integers.iter().map(|&j| inverse[j]).collect();
        integers.sort_unstable();
        MilpInstance {
            name: self.name.clone(),
            objective: perm.iter().map(|&o| self.objective[o]).collect(),
            rows,
            integers,
            lower: perm.iter().map(|&o| self.lower[o]).collect(),
            upper: perm.iter().map(|&o| self.upper[o]).collect(),
            known_optimum: self.known_optimum,
            negated_objective: self.negated_objective,
            var_names: if self.var_names.is_empty() {
                Vec::new()
            } else {
                perm.iter().map(|&o| self.var_names[o].clone()).collect()
            },
            row_names: self.row_names.clone(),
        }
    }

    /// Column-wise view: for each variable, the rows it appears in.
    pub fn column_index(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = alloc::vec![Vec::new(); self.num_vars()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in &row.coefs {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
        }
        cols
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Tagged collection of instances with unique names.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct InstanceSet {
    pub entries: Vec<(MilpInstance, Split)>,
}

impl InstanceSet {
    pub fn new(entries: Vec<(MilpInstance, Split)>) -> Result<Self, InstanceError> {
        let mut seen = BTreeSet::new();
        for (inst, _) in &entries {
            if !seen.insert(inst.name.clone()) {
                return Err(InstanceError::DuplicateName(inst.name.clone()));
            }
        }
        Ok(InstanceSet { entries })
    }

    pub fn with_split(&self, split: Split) -> impl Iterator<Item = &MilpInstance> {
        self.entries.iter().filter(move |(_, s)| *s == split).map(|(i, _)| i)
    }

    pub fn split_of(&self, name: &str) -> Option<Split> {
        self.entries.iter().find(|(i, _)| i.name == name).map(|(_, s)| *s)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `min −x1 − x2` s.t. `x1 + x2 ≤ 1.5`, `x ∈ {0,1}²`; optimum −1.
pub fn toy_instance() -> MilpInstance {
    MilpInstance::new(
        "toy",
        alloc::vec![-1.0, -1.0],
        alloc::vec![Constraint { coefs: alloc::vec![(0, 1.0), (1, 1.0)], sense: Sense::Le, rhs: 1.5 }],
        [0, 1],
    )
    .and_then(|i| i.with_bounds(alloc::vec![0.0, 0.0], alloc::vec![1.0, 1.0]))
    .expect("toy instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_pure_lp() {
        let err = MilpInstance::new(
            "lp",
            vec![1.0],
            vec![Constraint { coefs: vec![(0, 1.0)], sense: Sense::Ge, rhs: 1.0 }],
            [],
        )
        .unwrap_err();
        assert!(matches!(err, InstanceError::NoIntegers(_)));
    }

    #[test]
    fn rejects_empty_row_and_bad_bounds() {
        let empty = MilpInstance::new(
            "e",
            vec![1.0],
            vec![Constraint { coefs: vec![(0, 0.0)], sense: Sense::Le, rhs: 1.0 }],
            [0],
        );
        assert_eq!(empty.unwrap_err(), InstanceError::EmptyRow(0));
        let inst = toy_instance().with_bounds(vec![2.0, 0.0], vec![1.0, 1.0]);
        assert_eq!(inst.unwrap_err(), InstanceError::InvertedBounds(0));
    }

    #[test]
    fn rejects_non_finite_coefficient() {
        let err = MilpInstance::new(
            "nf",
            vec![1.0],
            vec![Constraint { coefs: vec![(0, f64::INFINITY)], sense: Sense::Le, rhs: 1.0 }],
            [0],
        )
        .unwrap_err();
        assert_eq!(err, InstanceError::NonFinite { row: 0, col: 0 });
    }

    #[test]
    fn permutation_preserves_objective_values() {
        let inst = crate::milp::generate_instance(Family::Packing { vars: 6, rows: 3, max_value: 2 }, 4).unwrap();
        let perm = [3, 1, 5, 0, 2, 4];
        let p = inst.permuted(&perm);
        let x = [1.0, 0.0, 2.0, 1.0, 0.0, 1.0];
        let px: Vec<f64> = perm.iter().map(|&o| x[o]).collect();
        assert_eq!(inst.objective_value(&x), p.objective_value(&px));
        assert_eq!(inst.is_feasible(&x), p.is_feasible(&px));
    }

    #[test]
    fn duplicate_names_rejected() {
        let a = toy_instance();
        let err = InstanceSet::new(vec![(a.clone(), Split::Train), (a, Split::Test)]).unwrap_err();
        assert_eq!(err, InstanceError::DuplicateName("toy".into()));
    }
}
