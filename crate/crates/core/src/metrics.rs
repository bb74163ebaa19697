//! Benchmark aggregates.

use crate::num::{exp, ln, sqrt};

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("no values to aggregate")]
    Empty,
    #[error("shifted value {0} is not positive")]
    NonPositive(f64),
    #[error("measurements sum to zero")]
    ZeroSum,
}

/// `exp(mean(ln(v + shift))) − shift`.
pub fn shifted_geomean(values: &[f64], shift: f64) -> Result<f64, MetricError> {
    if values.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut acc = 0.0;
    let constant = values.iter().all(|&v| v == values[0]);
    for &v in values {
        let s = v + shift;
        if !(s > 0.0) {
            return Err(MetricError::NonPositive(s));
        }
        acc += ln(s);
    }
    if constant {
        // exact for constant lists, where exp(ln(v + s)) − s may round
        return Ok(values[0]);
    }
    Ok(exp(acc / values.len() as f64) - shift)
}

/// Run-to-run dispersion `(L / Σ n) · √(Σ (n − mean)²)`.
pub fn variability_score(values: &[f64]) -> Result<f64, MetricError> {
    if values.is_empty() {
        return Err(MetricError::Empty);
    }
    let l = values.len() as f64;
    let sum: f64 = values.iter().sum();
    if sum == 0.0 {
        return Err(MetricError::ZeroSum);
    }
    let mean = sum / l;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok(l / sum * sqrt(ss))
}
