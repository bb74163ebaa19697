use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Constraint, MilpInstance, Sense};

/// Synthetic instance families, all pure-integer with finite bounds so the
/// brute-force oracle applies at small sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// 0/1 knapsack with weakly correlated values, stated as `min −v·x`.
    Knapsack { items: usize },
    /// Weighted set cover: every element row `Σ x_s ≥ 1`.
    SetCover { elements: usize, sets: usize },
    /// General-integer packing `Ax ≤ b`, `x ∈ {0..max_value}`, `min −c·x`.
    Packing { vars: usize, rows: usize, max_value: u32 },
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Knapsack { .. } => "knapsack",
            Family::SetCover { .. } => "set-cover",
            Family::Packing { .. } => "packing",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GenerateError {
    #[error("degenerate {family} parameters: {reason}")]
    Degenerate { family: &'static str, reason: &'static str },
}

pub fn generate_instance(family: Family, seed: u64) -> Result<MilpInstance, GenerateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let degenerate = |reason| Err(GenerateError::Degenerate { family: family.tag(), reason });
    let inst = match family {
        Family::Knapsack { items } => {
            if items == 0 {
                return degenerate("zero items");
            }
            let weights: Vec<f64> = (0..items).map(|_| rng.gen_range(10..=60) as f64).collect();
            let values: Vec<f64> = weights.iter().map(|w| w + rng.gen_range(0..=20) as f64).collect();
            let cap = libm::floor(weights.iter().sum::<f64>() / 2.0);
            let row = Constraint { coefs: weights.iter().copied().enumerate().collect(), sense: Sense::Le, rhs: cap };
            MilpInstance {
                name: format!("knapsack-n{items}-s{seed}"),
                objective: values.iter().map(|v| -v).collect(),
                rows: vec![row],
                integers: (0..items).collect(),
                lower: vec![0.0; items],
                upper: vec![1.0; items],
                known_optimum: None,
                negated_objective: true,
                var_names: Vec::new(),
                row_names: Vec::new(),
            }
        }
        Family::SetCover { elements, sets } => {
            if elements == 0 || sets == 0 {
                return degenerate("zero elements or sets");
            }
            let costs: Vec<f64> = (0..sets).map(|_| rng.gen_range(1..=20) as f64).collect();
            let mut rows = Vec::with_capacity(elements);
            for _ in 0..elements {
                let mut members: Vec<usize> = (0..sets).filter(|_| rng.gen_bool(0.25)).collect();
                if members.len() < 2 {
                    // at least two covering sets keeps rows from fixing variables outright
                    let extra = rng.gen_range(0..sets);
                    if !members.contains(&extra) {
                        members.push(extra);
                    }
                    if members.len() < 2 && sets > 1 {
                        members.push((extra + 1 + rng.gen_range(0..sets - 1)) % sets);
                    }
                    members.sort_unstable();
                }
                rows.push(Constraint { coefs: members.into_iter().map(|s| (s, 1.0)).collect(), sense: Sense::Ge, rhs: 1.0 });
            }
            MilpInstance {
                name: format!("setcover-e{elements}-n{sets}-s{seed}"),
                objective: costs,
                rows,
                integers: (0..sets).collect(),
                lower: vec![0.0; sets],
                upper: vec![1.0; sets],
                known_optimum: None,
                negated_objective: false,
                var_names: Vec::new(),
                row_names: Vec::new(),
            }
        }
        Family::Packing { vars, rows: m, max_value } => {
            if vars == 0 || m == 0 || max_value == 0 {
                return degenerate("zero variables, rows or value range");
            }
            let ub = max_value as f64;
            let mut rows = Vec::with_capacity(m);
            for _ in 0..m {
                let mut coefs: Vec<(usize, f64)> = Vec::new();
                for j in 0..vars {
                    if rng.gen_bool(0.6) {
                        coefs.push((j, rng.gen_range(1..=9) as f64));
                    }
                }
                if coefs.is_empty() {
                    coefs.push((rng.gen_range(0..vars), rng.gen_range(1..=9) as f64));
                }
                let full: f64 = coefs.iter().map(|&(_, a)| a * ub).sum();
                let rhs = libm::floor(full * rng.gen_range(0.3..0.5)).max(1.0);
                rows.push(Constraint { coefs, sense: Sense::Le, rhs });
            }
            let objective = (0..vars).map(|_| -(rng.gen_range(1..=20) as f64)).collect();
            MilpInstance {
                name: format!("packing-n{vars}-m{m}-u{max_value}-s{seed}"),
                objective,
                rows,
                integers: (0..vars).collect(),
                lower: vec![0.0; vars],
                upper: vec![ub; vars],
                known_optimum: None,
                negated_objective: true,
                var_names: Vec::new(),
                row_names: Vec::new(),
            }
        }
    };
    debug_assert!(inst.validate().is_ok());
    Ok(inst)
}

/// Instances small enough for the brute-force oracle (at most 12 integer
/// variables, boxes below a million points), cycling through the families.
pub fn oracle_suite(count: usize) -> Vec<MilpInstance> {
    (0..count as u64)
        .map(|i| {
            let family = match i % 3 {
                0 => Family::Knapsack { items: 8 + (i as usize / 3) % 5 },
                1 => Family::SetCover { elements: 8 + (i as usize % 7), sets: 8 + (i as usize / 3) % 5 },
                _ => Family::Packing { vars: 6 + (i as usize / 3) % 3, rows: 2 + (i as usize % 3), max_value: 2 + (i as u32 / 3) % 2 },
            };
            generate_instance(family, 1000 + i).expect("suite parameters are valid")
        })
        .collect()
}

/// The benchmark suite: general-integer packing instances of mixed size,
/// `train` of them in the training split and `test` in the test split.
pub fn benchmark_suite(train: usize, test: usize) -> Result<super::InstanceSet, super::InstanceError> {
    let mut entries = Vec::with_capacity(train + test);
    for i in 0..(train + test) as u64 {
        let family = Family::Packing {
            vars: 18 + (i as usize % 4) * 2,
            rows: 8 + (i as usize % 3) * 2,
            max_value: 2 + (i as u32 % 2),
        };
        let inst = generate_instance(family, 500 + i).expect("suite parameters are valid");
        let split = if (i as usize) < train { super::Split::Train } else { super::Split::Test };
        entries.push((inst, split));
    }
    super::InstanceSet::new(entries)
}
