//! Exhaustive enumeration over the integer lattice, used as a test oracle.

use alloc::vec;
use alloc::vec::Vec;

use super::{MilpInstance, ROW_TOL};
use crate::lp::{LpSolver, LpStatus};
use crate::num::{ceil, floor};

#[derive(Clone, Debug, PartialEq)]
pub enum OracleOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
}

impl OracleOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            OracleOutcome::Optimal { value, .. } => Some(*value),
            OracleOutcome::Infeasible => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("instance has no integer variables")]
    NoIntegers,
    #[error("integer variable {0} has an infinite bound")]
    UnboundedInteger(usize),
    #[error("lattice has {size:.0} points, above the limit of {limit}")]
    BoxTooLarge { size: f64, limit: u64 },
    #[error("lp failure on lattice point: {0}")]
    Lp(#[from] crate::lp::LpError),
}

/// Default refusal threshold for the lattice size.
pub const DEFAULT_BOX_LIMIT: u64 = 10_000_000;

/// Enumerates every integer point of the bound box. Continuous variables, if
/// any, are resolved by one LP per lattice point.
pub fn brute_force_optimum(inst: &MilpInstance, box_limit: u64) -> Result<OracleOutcome, OracleError> {
    if inst.integers.is_empty() {
        return Err(OracleError::NoIntegers);
    }
    let mut lo = Vec::with_capacity(inst.integers.len());
    let mut hi = Vec::with_capacity(inst.integers.len());
    let mut size = 1.0f64;
    for &j in &inst.integers {
        if !inst.lower[j].is_finite() || !inst.upper[j].is_finite() {
            return Err(OracleError::UnboundedInteger(j));
        }
        let (l, u) = (ceil(inst.lower[j] - 1e-9), floor(inst.upper[j] + 1e-9));
        if l > u {
            return Ok(OracleOutcome::Infeasible);
        }
        size *= u - l + 1.0;
        lo.push(l);
        hi.push(u);
    }
    if size > box_limit as f64 {
        return Err(OracleError::BoxTooLarge { size, limit: box_limit });
    }

    let has_continuous = inst.integers.len() < inst.num_vars();
    let lp = if has_continuous { Some(LpSolver::new(inst)?) } else { None };

    let mut x = vec![0.0; inst.num_vars()];
    for (k, &j) in inst.integers.iter().enumerate() {
        x[j] = lo[k];
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let candidate = match &lp {
            None => {
                if inst.rows.iter().all(|r| r.violation(&x) <= ROW_TOL) {
                    Some((inst.objective_value(&x), x.clone()))
                } else {
                    None
                }
            }
            Some(lp) => {
                let mut lower = inst.lower.clone();
                let mut upper = inst.upper.clone();
                for &j in &inst.integers {
                    lower[j] = x[j];
                    upper[j] = x[j];
                }
                let res = lp.solve(&lower, &upper, None)?;
                match res.status {
                    LpStatus::Optimal => Some((res.objective, res.x)),
                    _ => None,
                }
            }
        };
        if let Some((v, p)) = candidate {
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, p));
            }
        }
        // odometer step over the integer coordinates
        let mut k = 0;
        loop {
            if k == inst.integers.len() {
                return Ok(match best {
                    Some((value, point)) => OracleOutcome::Optimal { value, point },
                    None => OracleOutcome::Infeasible,
                });
            }
            let j = inst.integers[k];
            if x[j] < hi[k] {
                x[j] += 1.0;
                break;
            }
            x[j] = lo[k];
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{generate_instance, toy_instance, Constraint, Family, Sense};

    #[test]
    fn toy_optimum_is_minus_one() {
        let out = brute_force_optimum(&toy_instance(), DEFAULT_BOX_LIMIT).unwrap();
        assert_eq!(out.value(), Some(-1.0));
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let inst = MilpInstance::new(
            "contra",
            vec![1.0],
            vec![
                Constraint { coefs: vec![(0, 1.0)], sense: Sense::Ge, rhs: 2.0 },
                Constraint { coefs: vec![(0, 1.0)], sense: Sense::Le, rhs: 1.0 },
            ],
            [0],
        )
        .unwrap()
        .with_bounds(vec![0.0], vec![5.0])
        .unwrap();
        assert_eq!(brute_force_optimum(&inst, 100).unwrap(), OracleOutcome::Infeasible);
    }

    #[test]
    fn refuses_large_box() {
        let inst = generate_instance(Family::Packing { vars: 12, rows: 4, max_value: 2 }, 3).unwrap();
        let err = brute_force_optimum(&inst, 1000).unwrap_err();
        assert!(matches!(err, OracleError::BoxTooLarge { size, .. } if size == 531441.0));
    }

    #[test]
    fn refuses_unbounded_integer() {
        let inst = MilpInstance::new(
            "free",
            vec![1.0],
            vec![Constraint { coefs: vec![(0, 1.0)], sense: Sense::Ge, rhs: 1.0 }],
            [0],
        )
        .unwrap();
        assert_eq!(brute_force_optimum(&inst, 100).unwrap_err(), OracleError::UnboundedInteger(0));
    }

    #[test]
    fn mixed_instance_uses_lp_per_point() {
        // min -x0 - y, x0 + y <= 2.5, y <= 1 continuous, x0 in {0..3}
        let inst = MilpInstance::new(
            "mixed",
            vec![-1.0, -1.0],
            vec![Constraint { coefs: vec![(0, 1.0), (1, 1.0)], sense: Sense::Le, rhs: 2.5 }],
            [0],
        )
        .unwrap()
        .with_bounds(vec![0.0, 0.0], vec![3.0, 1.0])
        .unwrap();
        let out = brute_force_optimum(&inst, 100).unwrap();
        assert!((out.value().unwrap() + 2.5).abs() < 1e-9);
    }
}
