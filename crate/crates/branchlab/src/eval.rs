//! Policy evaluation runs and node-count tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use branchlab_core::metrics::{shifted_geomean, MetricError};
use branchlab_core::milp::{InstanceSet, Split};
use branchlab_core::{MilpInstance, SolveConfig, SolveError, SolveStatus};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::run::{reference_optimum, solve_timed, NamedPolicy};

pub const SHIFT: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRun {
    /// Report label of the policy.
    pub policy: String,
    /// Rule family, e.g. `hybrid-reliability` or `learned`.
    pub kind: String,
    pub instance: String,
    pub split: Split,
    pub seed: u64,
    pub nodes: u64,
    pub fair_nodes: u64,
    pub wall_time: f64,
    pub status: SolveStatus,
    /// Seconds since the Unix epoch when the run finished.
    pub timestamp: u64,
}

impl EvalRun {
    pub fn uses_strong_branching(&self) -> bool {
        matches!(self.kind.as_str(), "fullstrong" | "hybrid-reliability")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{instance}: {source}")]
    Solve { instance: String, source: SolveError },
    #[error("{0} is infeasible; evaluation needs a finite cutoff")]
    Infeasible(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub seeds: Vec<u64>,
    pub time_limit: f64,
    pub node_limit: Option<u64>,
    pub jobs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { seeds: (0..5).collect(), time_limit: 3600.0, node_limit: None, jobs: 1 }
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Solves every instance with every policy and seed, the cutoff set to the
/// instance optimum. Runs come back in (policy, instance, seed) order.
pub fn evaluate_policies(
    set: &InstanceSet,
    policies: &[NamedPolicy],
    opts: &EvalOptions,
) -> Result<Vec<EvalRun>, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    pool.install(|| {
        let cutoffs: Vec<f64> = set
            .entries
            .par_iter()
            .map(|(inst, _)| {
                reference_optimum(inst)
                    .map_err(|source| EvalError::Solve { instance: inst.name.clone(), source })?
                    .ok_or_else(|| EvalError::Infeasible(inst.name.clone()))
            })
            .collect::<Result<_, _>>()?;
        let mut work = Vec::new();
        for p in 0..policies.len() {
            for i in 0..set.entries.len() {
                for &s in &opts.seeds {
                    work.push((p, i, s));
                }
            }
        }
        work.par_iter()
            .map(|&(p, i, seed)| {
                let (inst, split): &(MilpInstance, Split) = &set.entries[i];
                let cfg = SolveConfig {
                    time_limit: opts.time_limit,
                    node_limit: opts.node_limit,
                    cutoff: Some(cutoffs[i]),
                    ..SolveConfig::seeded(seed)
                };
                let r = solve_timed(inst, &cfg, &policies[p].policy, &mut branchlab_core::bnb::NoObserver)
                    .map_err(|source| EvalError::Solve { instance: inst.name.clone(), source })?;
                Ok(EvalRun {
                    policy: policies[p].label.clone(),
                    kind: policies[p].policy.id().to_string(),
                    instance: inst.name.clone(),
                    split: *split,
                    seed,
                    nodes: r.nodes,
                    fair_nodes: r.fair_nodes,
                    wall_time: r.wall_time,
                    status: r.status,
                    timestamp: now(),
                })
            })
            .collect()
    })
}

/// Shifted geometric mean that does not depend on the order of `values`.
pub fn aggregate(values: &[f64]) -> Result<f64, MetricError> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    shifted_geomean(&v, SHIFT)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub nodes: f64,
    pub fair: f64,
    pub runs: usize,
    pub time_limited: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub label: String,
    pub split: Option<Split>,
    pub cells: Vec<Option<Cell>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalTable {
    pub policies: Vec<String>,
    /// Policies whose fair column differs in meaning from the node count.
    pub strong: Vec<bool>,
    pub seeds: usize,
    pub instances: usize,
    /// All, Train and Test.
    pub aggregates: Vec<Row>,
    pub rows: Vec<Row>,
}

fn cell(runs: &[&EvalRun]) -> Result<Option<Cell>, MetricError> {
    if runs.is_empty() {
        return Ok(None);
    }
    let nodes: Vec<f64> = runs.iter().map(|r| r.nodes as f64).collect();
    let fair: Vec<f64> = runs.iter().map(|r| r.fair_nodes as f64).collect();
    Ok(Some(Cell {
        nodes: aggregate(&nodes)?,
        fair: aggregate(&fair)?,
        runs: runs.len(),
        time_limited: runs.iter().any(|r| r.status == SolveStatus::TimeLimit),
    }))
}

/// Per-instance and aggregate shifted geometric means (shift 100).
pub fn summarize(runs: &[EvalRun]) -> Result<EvalTable, MetricError> {
    let mut policies: Vec<String> = Vec::new();
    let mut strong = Vec::new();
    let mut instances: Vec<(String, Split)> = Vec::new();
    let mut seeds = std::collections::BTreeSet::new();
    for r in runs {
        if !policies.contains(&r.policy) {
            policies.push(r.policy.clone());
            strong.push(r.uses_strong_branching());
        }
        if !instances.iter().any(|(n, _)| n == &r.instance) {
            instances.push((r.instance.clone(), r.split));
        }
        seeds.insert(r.seed);
    }
    instances.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));
    let mut by_key: BTreeMap<(&str, &str), Vec<&EvalRun>> = BTreeMap::new();
    for r in runs {
        by_key.entry((r.policy.as_str(), r.instance.as_str())).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (name, split) in &instances {
        let cells = policies
            .iter()
            .map(|p| cell(by_key.get(&(p.as_str(), name.as_str())).map_or(&[][..], Vec::as_slice)))
            .collect::<Result<_, _>>()?;
        rows.push(Row { label: name.clone(), split: Some(*split), cells });
    }
    let mut aggregates = Vec::new();
    for (label, filter) in [("All", None), ("Train", Some(Split::Train)), ("Test", Some(Split::Test))] {
        let cells = policies
            .iter()
            .map(|p| {
                let sel: Vec<&EvalRun> =
                    runs.iter().filter(|r| &r.policy == p && filter.map_or(true, |s| r.split == s)).collect();
                cell(&sel)
            })
            .collect::<Result<_, _>>()?;
        aggregates.push(Row { label: label.to_string(), split: filter, cells });
    }
    Ok(EvalTable { policies, strong, seeds: seeds.len(), instances: instances.len(), aggregates, rows })
}

fn fmt_cell(c: &Option<Cell>, fair: bool) -> String {
    match c {
        None => "-".to_string(),
        Some(c) => {
            let v = if fair { c.fair } else { c.nodes };
            format!("{v:.2}{}", if c.time_limited { "*" } else { "" })
        }
    }
}

impl EvalTable {
    fn columns(&self) -> Vec<(usize, bool, String)> {
        let mut cols = Vec::new();
        for (i, p) in self.policies.iter().enumerate() {
            cols.push((i, false, p.clone()));
            if self.strong[i] {
                cols.push((i, true, format!("{p} fair (analog)")));
            }
        }
        cols
    }

    /// Long-format CSV: one line per (row, policy).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,split,policy,nodes,fair_nodes,runs,time_limited\n");
        for row in self.aggregates.iter().chain(&self.rows) {
            let split = row.split.map_or("all".to_string(), |s| s.to_string());
            for (p, c) in self.policies.iter().zip(&row.cells) {
                if let Some(c) = c {
                    let _ = writeln!(out, "{},{split},{p},{},{},{},{}", row.label, c.nodes, c.fair, c.runs, c.time_limited);
                }
            }
        }
        out
    }

    /// Aligned text table: aggregate rows first, then one row per instance.
    pub fn to_text(&self) -> String {
        let cols = self.columns();
        let mut lines: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["Instance".to_string()];
        header.extend(cols.iter().map(|c| c.2.clone()));
        lines.push(header);
        for row in self.aggregates.iter().chain(&self.rows) {
            let runs = row.cells.iter().flatten().map(|c| c.runs).max().unwrap_or(0);
            let label = if row.split.is_none() || self.aggregates.iter().any(|a| a.label == row.label) {
                format!("{} ({runs})", row.label)
            } else {
                row.label.clone()
            };
            let mut line = vec![label];
            line.extend(cols.iter().map(|&(i, fair, _)| fmt_cell(&row.cells[i], fair)));
            lines.push(line);
        }
        let widths: Vec<usize> =
            (0..lines[0].len()).map(|j| lines.iter().map(|l| l[j].chars().count()).max().unwrap_or(0)).collect();
        let mut out = format!(
            "Nodes, shifted geometric mean (shift {SHIFT}) over {} instances x {} seeds; * = time limit hit\n",
            self.instances, self.seeds
        );
        for (n, l) in lines.iter().enumerate() {
            let cells: Vec<String> = l
                .iter()
                .enumerate()
                .map(|(j, s)| if j == 0 { format!("{s:<w$}", w = widths[j]) } else { format!("{s:>w$}", w = widths[j]) })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
            if n == 0 || n == self.aggregates.len() {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
                out.push('\n');
            }
        }
        out
    }
}

pub fn runs_jsonl(runs: &[EvalRun]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in runs {
        serde_json::to_writer(&mut out, r).expect("runs serialize");
        out.push(b'\n');
    }
    out
}

pub fn parse_runs_jsonl(text: &str) -> Result<Vec<EvalRun>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(policy: &str, kind: &str, instance: &str, split: Split, seed: u64, nodes: u64, fair: u64) -> EvalRun {
        EvalRun {
            policy: policy.into(),
            kind: kind.into(),
            instance: instance.into(),
            split,
            seed,
            nodes,
            fair_nodes: fair,
            wall_time: 0.0,
            status: SolveStatus::CutoffProved,
            timestamp: 0,
        }
    }

    #[test]
    fn root_solved_instance_has_unit_mean() {
        let runs: Vec<_> = (0..5).map(|s| run("random", "random", "a", Split::Train, s, 1, 1)).collect();
        let t = summarize(&runs).unwrap();
        assert_eq!(t.rows[0].cells[0].as_ref().unwrap().nodes, 1.0);
    }

    #[test]
    fn aggregation_ignores_run_order() {
        let mut runs = vec![
            run("p", "pscost", "a", Split::Train, 0, 17, 17),
            run("p", "pscost", "b", Split::Test, 0, 230, 230),
            run("p", "pscost", "a", Split::Train, 1, 3, 3),
            run("p", "pscost", "c", Split::Test, 0, 91, 91),
        ];
        let a = summarize(&runs).unwrap();
        runs.reverse();
        let b = summarize(&runs).unwrap();
        assert_eq!(a.aggregates, b.aggregates);
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn fair_column_only_for_strong_rules() {
        let runs = vec![
            run("expert", "hybrid-reliability", "a", Split::Test, 0, 10, 14),
            run("random", "random", "a", Split::Test, 0, 40, 40),
        ];
        let t = summarize(&runs).unwrap();
        let text = t.to_text();
        assert!(text.contains("expert fair (analog)"));
        assert!(!text.contains("random fair"));
        assert!(t.to_csv().lines().count() > 1);
    }

    #[test]
    fn jsonl_round_trip() {
        let runs = vec![run("x", "random", "a", Split::Train, 0, 5, 5)];
        let text = String::from_utf8(runs_jsonl(&runs)).unwrap();
        assert_eq!(parse_runs_jsonl(&text).unwrap(), runs);
    }
}
