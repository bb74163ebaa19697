//! Single-pass activity-based bound tightening.

use crate::milp::{Constraint, Sense};
use crate::num::{abs, ceil, floor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Propagation {
    pub reductions: u64,
    pub infeasible: bool,
}

fn min_contrib(a: f64, l: f64, u: f64) -> f64 {
    if a > 0.0 {
        a * l
    } else {
        a * u
    }
}

fn max_contrib(a: f64, l: f64, u: f64) -> f64 {
    if a > 0.0 {
        a * u
    } else {
        a * l
    }
}

/// Tightens `lower`/`upper` using every row that contains `changed`. Each row
/// is visited once with the bounds current at that moment.
pub fn propagate_bounds(
    rows: &[Constraint],
    rows_of_changed: &[(usize, f64)],
    integer: &[bool],
    lower: &mut [f64],
    upper: &mut [f64],
) -> Propagation {
    let mut out = Propagation::default();
    for &(i, _) in rows_of_changed {
        let row = &rows[i];
        let (use_upper_side, use_lower_side) = match row.sense {
            Sense::Le => (true, false),
            Sense::Ge => (false, true),
            Sense::Eq => (true, true),
        };
        if use_upper_side {
            let min_act: f64 = row.coefs.iter().map(|&(j, a)| min_contrib(a, lower[j], upper[j])).sum();
            if min_act.is_finite() {
                if min_act > row.rhs + 1e-7 {
                    out.infeasible = true;
                    return out;
                }
                for &(k, a) in &row.coefs {
                    if a == 0.0 {
                        continue;
                    }
                    let residual = min_act - min_contrib(a, lower[k], upper[k]);
                    let bound = (row.rhs - residual) / a;
                    if a > 0.0 {
                        tighten_upper(k, bound, integer, lower, upper, &mut out);
                    } else {
                        tighten_lower(k, bound, integer, lower, upper, &mut out);
                    }
                    if out.infeasible {
                        return out;
                    }
                }
            }
        }
        if use_lower_side {
            let max_act: f64 = row.coefs.iter().map(|&(j, a)| max_contrib(a, lower[j], upper[j])).sum();
            if max_act.is_finite() {
                if max_act < row.rhs - 1e-7 {
                    out.infeasible = true;
                    return out;
                }
                for &(k, a) in &row.coefs {
                    if a == 0.0 {
                        continue;
                    }
                    let residual = max_act - max_contrib(a, lower[k], upper[k]);
                    let bound = (row.rhs - residual) / a;
                    if a > 0.0 {
                        tighten_lower(k, bound, integer, lower, upper, &mut out);
                    } else {
                        tighten_upper(k, bound, integer, lower, upper, &mut out);
                    }
                    if out.infeasible {
                        return out;
                    }
                }
            }
        }
    }
    out
}

fn min_improvement(old: f64) -> f64 {
    1e-7 * abs(old).max(1.0)
}

fn tighten_upper(k: usize, bound: f64, integer: &[bool], lower: &mut [f64], upper: &mut [f64], out: &mut Propagation) {
    let b = if integer[k] { floor(bound + 1e-9) } else { bound };
    if b < upper[k] - min_improvement(upper[k]) || (upper[k].is_infinite() && b.is_finite()) {
        upper[k] = b;
        out.reductions += 1;
        if lower[k] > upper[k] + 1e-9 {
            out.infeasible = true;
        } else if upper[k] < lower[k] {
            upper[k] = lower[k];
        }
    }
}

fn tighten_lower(k: usize, bound: f64, integer: &[bool], lower: &mut [f64], upper: &mut [f64], out: &mut Propagation) {
    let b = if integer[k] { ceil(bound - 1e-9) } else { bound };
    if b > lower[k] + min_improvement(lower[k]) || (lower[k].is_infinite() && b.is_finite()) {
        lower[k] = b;
        out.reductions += 1;
        if lower[k] > upper[k] + 1e-9 {
            out.infeasible = true;
        } else if lower[k] > upper[k] {
            lower[k] = upper[k];
        }
    }
}
