use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::stats::Direction;
use crate::lp::Basis;
use crate::num::{ceil, floor, is_fractional};

/// The split that created a node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchInfo {
    pub var: usize,
    pub direction: Direction,
    /// LP value `x*_j` of the branching variable at the parent.
    pub value: f64,
    /// LP objective of the parent, for pseudocost updates.
    pub parent_objective: f64,
}

impl BranchInfo {
    /// Distance moved by the split in this direction.
    pub fn fractionality(&self) -> f64 {
        match self.direction {
            Direction::Down => self.value - floor(self.value),
            Direction::Up => ceil(self.value) - self.value,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BnbNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: u64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Inherited estimate, refreshed by the node LP.
    pub lower_bound: f64,
    pub branching: Option<BranchInfo>,
    /// Warm-start basis inherited from the parent LP.
    pub hint: Option<Basis>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ExpandError {
    #[error("variable {var} has integral LP value {value}")]
    Integral { var: usize, value: f64 },
    #[error("variable {0} is not an integer variable")]
    NotInteger(usize),
}

impl BnbNode {
    pub fn root(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        BnbNode {
            id: 0,
            parent: None,
            depth: 0,
            lower,
            upper,
            lower_bound: f64::NEG_INFINITY,
            branching: None,
            hint: None,
        }
    }

    /// Splits on `x_var ≤ ⌊value⌋ ∨ x_var ≥ ⌈value⌉`, returning the down and up
    /// children with ids `ids.0` and `ids.1`.
    pub fn expand(
        &self,
        var: usize,
        value: f64,
        integer: &[bool],
        parent_objective: f64,
        ids: (usize, usize),
    ) -> Result<(BnbNode, BnbNode), ExpandError> {
        if !integer.get(var).copied().unwrap_or(false) {
            return Err(ExpandError::NotInteger(var));
        }
        if !is_fractional(value) {
            return Err(ExpandError::Integral { var, value });
        }
        let estimate = self.lower_bound.max(parent_objective);
        let child = |id, direction| {
            let mut node = BnbNode {
                id,
                parent: Some(self.id),
                depth: self.depth + 1,
                lower: self.lower.clone(),
                upper: self.upper.clone(),
                lower_bound: estimate,
                branching: Some(BranchInfo { var, direction, value, parent_objective }),
                hint: None,
            };
            match direction {
                Direction::Down => node.upper[var] = floor(value),
                Direction::Up => node.lower[var] = ceil(value),
            }
            node
        };
        Ok((child(ids.0, Direction::Down), child(ids.1, Direction::Up)))
    }

    /// Number of variables whose local bounds differ from the given root box.
    pub fn bound_changes(&self, root_lower: &[f64], root_upper: &[f64]) -> usize {
        (0..self.lower.len())
            .filter(|&j| self.lower[j] != root_lower[j] || self.upper[j] != root_upper[j])
            .count()
    }
}
