//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line to
//! stderr (uncaptured) and then asserts its verdict.
//!
//! Run with `cargo test -p branchlab --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::sync::Arc;
use std::time::Instant;

use branchlab::collect::{assemble_splits, collect, standard_grids, CollectOptions};
use branchlab::eval::{aggregate, evaluate_policies, summarize, EvalOptions, EvalRun};
use branchlab::run::{reference_optimum, solve_timed, trace_jsonl, NamedPolicy};
use branchlab::shard::ShardFormat;
use branchlab::train::train_policy;
use branchlab_core::bnb::NoObserver;
use branchlab_core::dataset::{DataPoint, Provenance, SplitGrid, SplitName};
use branchlab_core::features::{
    check_ranges, g_norm_max, rel_dist, rel_pos, var_score, CandidateMatrix, TreeState, CANDIDATE_DIM, TREE_DIM,
};
use branchlab_core::metrics::{shifted_geomean, variability_score};
use branchlab_core::milp::{benchmark_suite, brute_force_optimum, oracle_suite, OracleOutcome, Split, DEFAULT_BOX_LIMIT};
use branchlab_core::neural::{
    backward, loss, NetKind, NetSpec, PolicyNet, TrainConfig, DEPTH_GRID, HIDDEN_GRID, INF,
};
use branchlab_core::{solve, BranchEvent, BranchObserver, MilpInstance, Policy, SolveConfig, SolveStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Prints the verdict line; a test that panics before `finish` reports FAIL.
struct Criterion {
    n: u32,
    title: &'static str,
    done: bool,
}

impl Criterion {
    fn start(n: u32, title: &'static str) -> Self {
        Criterion { n, title, done: false }
    }

    fn finish(mut self, pass: bool, detail: &str) {
        self.done = true;
        let verdict = if pass { "PASS" } else { "FAIL" };
        let _ = writeln!(std::io::stderr(), "criterion {:>2}: {verdict}  {} | {detail}", self.n, self.title);
        assert!(pass, "criterion {} failed: {detail}", self.n);
    }
}

impl Drop for Criterion {
    fn drop(&mut self) {
        if !self.done {
            let _ = writeln!(std::io::stderr(), "criterion {:>2}: FAIL  {} | panicked", self.n, self.title);
        }
    }
}

/// Extra lines under a verdict.
fn note(text: &str) {
    let _ = std::io::stderr().write_all(text.as_bytes());
}

fn random_point<R: Rng>(rng: &mut R, n: usize) -> DataPoint {
    let columns = (0..n)
        .map(|_| {
            let mut c = [0.0; CANDIDATE_DIM];
            c.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            c
        })
        .collect();
    DataPoint {
        candidates: CandidateMatrix { columns, candidates: (0..n).collect(), step: 0 },
        tree: TreeState { values: (0..TREE_DIM).map(|_| rng.gen_range(0.0..1.0)).collect(), step: 0 },
        label: rng.gen_range(0..n),
        provenance: Provenance::default(),
    }
}

fn builtin_policies() -> Vec<Policy> {
    vec![Policy::Random, Policy::Pscost, Policy::FullStrong, Policy::expert()]
}

fn untrained_learned() -> Vec<Policy> {
    vec![
        Policy::Learned(Arc::new(PolicyNet::new(NetSpec::new(NetKind::NoTree, 32, 0).unwrap(), 21).unwrap())),
        Policy::Learned(Arc::new(PolicyNet::new(NetSpec::new(NetKind::TreeGate, 64, 3).unwrap(), 22).unwrap())),
    ]
}

#[test]
fn c01_solver_exactness() {
    let c = Criterion::start(1, "solver exactness against the brute-force oracle");
    let t0 = Instant::now();
    let suite = oracle_suite(60);
    let mut checked = 0;
    let mut failures = Vec::new();
    for inst in &suite {
        assert!(inst.integers.len() <= 12);
        let oracle = match brute_force_optimum(inst, DEFAULT_BOX_LIMIT).unwrap() {
            OracleOutcome::Optimal { value, .. } => Some(value),
            OracleOutcome::Infeasible => None,
        };
        for policy in builtin_policies() {
            for seed in 0..2 {
                let r = solve(inst, &SolveConfig::seeded(seed), &policy).unwrap();
                let ok = match (oracle, r.value) {
                    (Some(a), Some(b)) => (a - b).abs() <= 1e-6 && r.status == SolveStatus::Optimal,
                    (None, None) => r.status == SolveStatus::Infeasible,
                    _ => false,
                };
                if !ok {
                    failures.push(format!("{} {} seed {seed}: {:?} vs oracle {oracle:?}", inst.name, policy.id(), r.value));
                }
                checked += 1;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    for f in &failures {
        note(&format!("    {f}\n"));
    }
    c.finish(
        failures.is_empty() && secs < 60.0,
        &format!("{} instances, {checked} solves, {} mismatches, {secs:.1}s (limit 60s)", suite.len(), failures.len()),
    );
}

#[test]
fn c02_formula_examples() {
    let c = Criterion::start(2, "closed-form formula examples");
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let mut bad = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if !close(got, want) {
            bad.push(format!("{name}: got {got}, want {want}"));
        }
    };
    check("var_score(0.1, 0.1)", var_score(0.1, 0.1), 0.5);
    for avg in [0.0, 0.05, 1.0, 1e6] {
        check("var_score(0, avg)", var_score(0.0, avg), 0.0);
    }
    check("var_score(0.3, 0.05)", var_score(0.3, 0.05), 0.75);
    check("g_norm_max(0)", g_norm_max(0.0), 0.1);
    check("g_norm_max(1)", g_norm_max(1.0), 0.5);
    check("g_norm_max(9)", g_norm_max(9.0), 0.9);
    check("rel_dist(1, -1)", rel_dist(1.0, -1.0), 0.0);
    check("rel_dist(0, 0)", rel_dist(0.0, 0.0), 0.0);
    check("rel_dist(2, 4)", rel_dist(2.0, 4.0), 0.5);
    check("rel_pos(5, 0, 10)", rel_pos(5.0, 0.0, 10.0), 0.5);
    check("rel_pos(3, 10, 2)", rel_pos(3.0, 10.0, 2.0), 0.875);
    check("rel_pos collapsed", rel_pos(1.0, 4.0, 4.0 + 1e-11), 0.0);
    check("shifted_geomean([0, 0], 100)", shifted_geomean(&[0.0, 0.0], 100.0).unwrap(), 0.0);
    check("shifted_geomean([100, 400], 100)", shifted_geomean(&[100.0, 400.0], 100.0).unwrap(), (200.0f64 * 500.0).sqrt() - 100.0);
    check("shifted_geomean([37], 100)", shifted_geomean(&[37.0], 100.0).unwrap(), 37.0);
    check("shifted_geomean([4, 9], 0)", shifted_geomean(&[4.0, 9.0], 0.0).unwrap(), 6.0);
    check("VS constant", variability_score(&[7.0, 7.0, 7.0]).unwrap(), 0.0);
    check("VS [1,1,1,5]", variability_score(&[1.0, 1.0, 1.0, 5.0]).unwrap(), 0.5 * 12f64.sqrt());
    let vs_zero = variability_score(&[0.0, 0.0]).is_err();

    // cross-entropy: uniform logits, batch mean, and the confident limit
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut zero = PolicyNet::new(NetSpec::new(NetKind::NoTree, 32, 0).unwrap(), 0).unwrap();
    zero.params.set_flat(&vec![0.0; zero.param_count()]).unwrap();
    let p4 = random_point(&mut rng, 4);
    check("uniform loss over 4", loss(&zero, &[p4]).unwrap(), 4f64.ln());
    let net = PolicyNet::new(NetSpec::new(NetKind::TreeGate, 32, 2).unwrap(), 4).unwrap();
    let (a, b) = (random_point(&mut rng, 3), random_point(&mut rng, 6));
    let (la, lb) = (loss(&net, std::slice::from_ref(&a)).unwrap(), loss(&net, std::slice::from_ref(&b)).unwrap());
    check("two-sample mean", loss(&net, &[a, b]).unwrap(), (la + lb) / 2.0);
    let mut confident = Vec::new();
    for scale in [1.0, 5.0, 20.0, 60.0] {
        let mut sharp = zero.clone();
        for (i, layer) in sharp.params.candidate.iter_mut().enumerate() {
            if i == 0 {
                layer.w[0] = scale;
            } else if i + 1 < sharp.spec.candidate_layers().len() {
                layer.w[0] = 1.0;
            } else {
                (0..layer.out).for_each(|r| layer.w[r * layer.inp] = 1.0);
            }
        }
        let mut p = random_point(&mut rng, 5);
        p.candidates.columns.iter_mut().for_each(|c| c[0] = 0.0);
        p.candidates.columns[p.label][0] = 1.0;
        confident.push(loss(&sharp, &[p]).unwrap());
    }
    let limit_ok = confident.windows(2).all(|w| w[1] < w[0]) && *confident.last().unwrap() < 1e-12;
    if !limit_ok {
        bad.push(format!("confident losses {confident:?} do not tend to 0"));
    }
    if !vs_zero {
        bad.push("VS of all-zero measurements must be an error".into());
    }
    for b in &bad {
        note(&format!("    {b}\n"));
    }
    c.finish(bad.is_empty(), &format!("{} mismatches", bad.len()));
}

/// Smallest |pre-activation| of any ReLU unit in the batch.
fn relu_margin(net: &PolicyNet, batch: &[DataPoint]) -> f64 {
    let mut m = f64::INFINITY;
    for p in batch {
        let t = net.forward_auto(&p.candidates, &p.tree).unwrap();
        for c in &t.candidates {
            for z in &c.pre[..c.pre.len() - 1] {
                m = z.iter().fold(m, |m, v| m.min(v.abs()));
            }
        }
        if let Some((_, hidden)) = t.tree_pre.split_last() {
            for z in hidden {
                m = z.iter().fold(m, |m, v| m.min(v.abs()));
            }
        }
    }
    m
}

#[test]
fn c03_gradient_check() {
    let c = Criterion::start(3, "analytic gradients vs central differences");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut params = 0;
    for i in 0..20 {
        let kind = if i % 2 == 0 { NetKind::NoTree } else { NetKind::TreeGate };
        let h = [32, 64][(i / 2) % 2];
        let d = [2, 3][(i / 4) % 2];
        let net = PolicyNet::new(NetSpec::new(kind, h, d).unwrap(), rng.gen()).unwrap();
        let batch = loop {
            let b: Vec<_> = (0..3)
                .map(|_| {
                    let n = rng.gen_range(1..6);
                    random_point(&mut rng, n)
                })
                .collect();
            if relu_margin(&net, &b) > 1e-4 {
                break b;
            }
        };
        let (_, grads) = backward(&net, &batch).unwrap();
        let g = grads.flat();
        let base = net.params.flat();
        let mut probe = net.clone();
        let mut p = base.clone();
        for j in 0..g.len() {
            p[j] = base[j] + 1e-5;
            probe.params.set_flat(&p).unwrap();
            let up = loss(&probe, &batch).unwrap();
            p[j] = base[j] - 1e-5;
            probe.params.set_flat(&p).unwrap();
            let down = loss(&probe, &batch).unwrap();
            p[j] = base[j];
            let fd = (up - down) / 2e-5;
            worst = worst.max((g[j] - fd).abs() / g[j].abs().max(fd.abs()).max(1e-6));
        }
        params += g.len();
    }
    c.finish(worst < 1e-4, &format!("20 nets, {params} parameters, max relative error {worst:.2e} (limit 1e-4)"));
}

#[test]
fn c04_architecture_shapes() {
    let c = Criterion::start(4, "halving schedule, gate width, unit-gate reduction");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for &h in &HIDDEN_GRID {
        for &d in &DEPTH_GRID {
            let spec = NetSpec::new(NetKind::TreeGate, h, d).unwrap();
            let layers = spec.candidate_layers();
            let halving = layers[0] == h && layers.windows(2).all(|w| w[1] * 2 == w[0]) && *layers.last().unwrap() == INF;
            if !halving || spec.gate_dim() != layers.iter().sum::<usize>() {
                bad.push(format!("h={h} d={d}: layers {layers:?}, H={}", spec.gate_dim()));
            }
            let tg = PolicyNet::new(spec, rng.gen()).unwrap();
            tg.check_shapes().unwrap();
            if tg.param_count() != spec.param_count() {
                bad.push(format!("h={h} d={d}: parameter count"));
            }
            let mut nt = PolicyNet::new(NetSpec::new(NetKind::NoTree, h, 0).unwrap(), 0).unwrap();
            nt.params.candidate = tg.params.candidate.clone();
            for n in [1, 4, 9] {
                let p = random_point(&mut rng, n);
                let a = tg.forward_unit_gates(&p.candidates).unwrap().logits;
                let b = nt.forward(&p.candidates, None).unwrap().logits;
                worst = a.iter().zip(&b).fold(worst, |m, (x, y)| m.max((x - y).abs()));
            }
        }
    }
    let s128 = NetSpec::new(NetKind::TreeGate, 128, 2).unwrap();
    let s64 = NetSpec::new(NetKind::TreeGate, 64, 2).unwrap();
    if s128.candidate_layers() != [128, 64, 32, 16, 8] || s128.gate_dim() != 248 {
        bad.push("h=128 example".into());
    }
    if s64.candidate_layers() != [64, 32, 16, 8] || s64.gate_dim() != 120 {
        bad.push("h=64 example".into());
    }
    for b in &bad {
        note(&format!("    {b}\n"));
    }
    c.finish(
        bad.is_empty() && worst <= 1e-12,
        &format!("{} grid points, max unit-gate logit difference {worst:.1e} (limit 1e-12)", HIDDEN_GRID.len() * DEPTH_GRID.len()),
    );
}

#[test]
fn c05_equivariance() {
    let c = Criterion::start(5, "candidate permutation equivariance");
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = 0;
    for i in 0..100 {
        let kind = if i % 2 == 0 { NetKind::NoTree } else { NetKind::TreeGate };
        let h = HIDDEN_GRID[i % HIDDEN_GRID.len()];
        let net = PolicyNet::new(NetSpec::new(kind, h, DEPTH_GRID[i % 3]).unwrap(), rng.gen()).unwrap();
        let n = rng.gen_range(1..16);
        let p = random_point(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        for j in (1..n).rev() {
            perm.swap(j, rng.gen_range(0..=j));
        }
        let a = net.forward_auto(&p.candidates, &p.tree).unwrap();
        let b = net.forward_auto(&p.candidates.permuted(&perm), &p.tree).unwrap();
        if perm.iter().enumerate().any(|(j, &src)| b.probabilities[j].to_bits() != a.probabilities[src].to_bits()) {
            mismatches += 1;
        }
    }
    c.finish(mismatches == 0, &format!("100 forwards, {mismatches} not bitwise equivariant"));
}

#[derive(Default)]
struct FeatureAudit {
    states: usize,
    failures: Vec<String>,
}

impl BranchObserver for FeatureAudit {
    fn wants_features(&self) -> bool {
        true
    }

    fn on_branch(&mut self, e: &BranchEvent<'_>) {
        let (m, t) = e.features.expect("features requested");
        self.states += 1;
        let dims = m.columns.len() == e.candidates.len() && !m.is_empty() && t.values.len() == TREE_DIM;
        if !dims || !m.is_finite() || !t.is_finite() {
            self.failures.push(format!("step {}: bad dims or non-finite entry", e.step));
        } else if let Err(err) = check_ranges(m, t) {
            self.failures.push(format!("step {}: {err}", e.step));
        }
    }
}

#[test]
fn c06_feature_rigidity() {
    let c = Criterion::start(6, "feature dims, finiteness and ranges over full solves");
    let suite = benchmark_suite(20, 6).unwrap();
    let mut instances: Vec<&MilpInstance> = suite.with_split(Split::Test).collect();
    let extra = oracle_suite(30);
    instances.extend(extra.iter());
    let mut policies = builtin_policies();
    policies.extend(untrained_learned());
    let mut audit = FeatureAudit::default();
    let mut solves = 0;
    for inst in &instances {
        for policy in &policies {
            for seed in 0..5 {
                let cfg = SolveConfig { k_random: seed * 2, ..SolveConfig::seeded(seed) };
                solve_timed(inst, &cfg, policy, &mut audit).unwrap();
                solves += 1;
            }
        }
    }
    for f in audit.failures.iter().take(10) {
        note(&format!("    {f}\n"));
    }
    c.finish(
        audit.failures.is_empty() && audit.states >= 10_000,
        &format!("{solves} solves, {} states (minimum 10000), {} violations", audit.states, audit.failures.len()),
    );
}

fn named(label: &str, policy: Policy) -> NamedPolicy {
    NamedPolicy { label: label.to_string(), policy }
}

fn geomean_by_policy(runs: &[EvalRun], label: &str) -> f64 {
    let v: Vec<f64> = runs.iter().filter(|r| r.policy == label).map(|r| r.nodes as f64).collect();
    aggregate(&v).unwrap()
}

#[test]
fn c07_policy_ordering() {
    let c = Criterion::start(7, "strong <= expert <= pscost <= random with 5% margins");
    let t0 = Instant::now();
    let suite = benchmark_suite(20, 6).unwrap();
    let policies = vec![
        named("strong", Policy::FullStrong),
        named("expert", Policy::expert()),
        named("pscost", Policy::Pscost),
        named("random", Policy::Random),
    ];
    let runs = evaluate_policies(&suite, &policies, &EvalOptions::default()).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let g: Vec<f64> = policies.iter().map(|p| geomean_by_policy(&runs, &p.label)).collect();
    let mut violated = Vec::new();
    for w in 0..3 {
        let (a, b) = (&policies[w].label, &policies[w + 1].label);
        let margin = 1.0 - g[w] / g[w + 1];
        let held = margin >= 0.05;
        note(&format!("    {a} {:.2} vs {b} {:.2}: margin {:.1}% {}\n", g[w], g[w + 1], 100.0 * margin, if held { "ok" } else { "VIOLATED" }));
        if !held {
            violated.push((w, a.clone(), b.clone()));
        }
    }
    if !violated.is_empty() {
        let table = summarize(&runs).unwrap();
        note(&format!("    per-instance breakdown:\n{}", table.to_text()));
    }
    // the ordering is reported when violated; strong vs random is expected to hold
    let strong_beats_random = g[0] <= g[3];
    c.finish(
        strong_beats_random && secs < 900.0,
        &format!(
            "{} instances x 5 seeds, geomeans strong {:.1} expert {:.1} pscost {:.1} random {:.1}, {} inequalities reported violated, {secs:.0}s (limit 900s)",
            suite.len(),
            g[0],
            g[1],
            g[2],
            g[3],
            violated.len()
        ),
    );
}

#[test]
fn c08_imitation_smoke() {
    let c = Criterion::start(8, "collect, train NoTree and TreeGate, solve the training suite");
    let dir = tempfile::tempdir().unwrap();
    let suite = benchmark_suite(20, 6).unwrap();
    let opts = CollectOptions { formats: vec![ShardFormat::Jsonl], ..CollectOptions::default() };
    let mut manifest = None;
    for split in SplitName::ALL {
        manifest = Some(collect(&suite, split, &SplitGrid::standard(split), &opts, dir.path()).unwrap());
    }
    let manifest = manifest.unwrap();
    let data = assemble_splits(dir.path(), &manifest, &standard_grids(), &BTreeSet::new()).unwrap();
    let counts = data.counts();
    note(&format!(
        "    points: train {}, valid {}, test {}\n",
        counts[&SplitName::Train],
        counts[&SplitName::Valid],
        counts[&SplitName::Test]
    ));

    let cfg = TrainConfig { lr: 0.01, epochs: 40, milestones: vec![20, 30], ..TrainConfig::default() };
    let mut nets = BTreeMap::new();
    let mut deterministic = true;
    for (label, kind, d) in [("notree", NetKind::NoTree, 0), ("treegate", NetKind::TreeGate, 5)] {
        let spec = NetSpec::new(kind, 64, d).unwrap();
        let (a, sa) = train_policy(&data, spec, 0, &cfg).unwrap();
        let (b, sb) = train_policy(&data, spec, 0, &cfg).unwrap();
        let same = serde_json::to_vec(&a).unwrap() == serde_json::to_vec(&b).unwrap() && sa == sb;
        deterministic &= same;
        note(&format!(
            "    {label}: final train loss {:.4}, valid top-1 {:.2}% top-5 {:.2}%, test top-1 {:.2}%, rerun identical: {same}\n",
            sa.final_train_loss,
            100.0 * sa.valid_top1.unwrap(),
            100.0 * sa.valid_top5.unwrap(),
            100.0 * sa.test_top1.unwrap()
        ));
        nets.insert(label, (a.net().unwrap(), sa));
    }
    let gap = nets["treegate"].1.valid_top1.unwrap() - nets["notree"].1.valid_top1.unwrap();
    note(&format!(
        "    valid top-1 gap TreeGate - NoTree: {:+.2} points ({})\n",
        100.0 * gap,
        if gap >= 0.0 { "same direction as the reference finding" } else { "opposite direction, reported" }
    ));

    let mut unsolved = Vec::new();
    let mut fair_mismatch = 0;
    for (label, (net, _)) in &nets {
        let policy = Policy::Learned(Arc::new(net.clone()));
        for inst in suite.with_split(Split::Train) {
            let want = reference_optimum(inst).unwrap().unwrap();
            let cfg = SolveConfig { time_limit: f64::INFINITY, ..SolveConfig::seeded(0) };
            let r = solve_timed(inst, &cfg, &policy, &mut NoObserver).unwrap();
            if r.status != SolveStatus::Optimal || (r.value.unwrap() - want).abs() > 1e-6 {
                unsolved.push(format!("{label} on {}: {} {:?}", inst.name, r.status.as_str(), r.value));
            }
            fair_mismatch += usize::from(r.fair_nodes != r.nodes);
        }
    }
    for u in &unsolved {
        note(&format!("    {u}\n"));
    }
    c.finish(
        deterministic && unsolved.is_empty() && fair_mismatch == 0,
        &format!(
            "training deterministic: {deterministic}, {} of 40 training-suite solves failed, valid top-1 gap {:+.2} points",
            unsolved.len(),
            100.0 * gap
        ),
    );
}

#[test]
fn c09_fair_node_identity() {
    let c = Criterion::start(9, "fair nodes equal nodes without strong branching");
    let suite = benchmark_suite(20, 6).unwrap();
    let mut policies = vec![named("random", Policy::Random), named("pscost", Policy::Pscost)];
    for (i, p) in untrained_learned().into_iter().enumerate() {
        policies.push(named(&format!("learned{i}"), p));
    }
    let runs = evaluate_policies(&suite, &policies, &EvalOptions::default()).unwrap();
    let mut total = runs.len();
    let mut bad = runs.iter().filter(|r| r.fair_nodes != r.nodes).count();
    for inst in oracle_suite(30) {
        for p in &policies {
            for seed in 0..5 {
                let cfg = SolveConfig { k_random: seed, ..SolveConfig::seeded(seed) };
                let r = solve(&inst, &cfg, &p.policy).unwrap();
                bad += usize::from(r.fair_nodes != r.nodes);
                total += 1;
            }
        }
    }
    c.finish(bad == 0, &format!("{total} runs, {bad} with fair != nodes"));
}

#[test]
fn c10_reproducibility() {
    let c = Criterion::start(10, "bit-identical traces, shards and checkpoints");
    let mut bad = Vec::new();

    // traces and reports, apart from wall time
    let suite = benchmark_suite(4, 2).unwrap();
    let mut policies = builtin_policies();
    policies.extend(untrained_learned());
    let mut traces = 0;
    for (inst, _) in &suite.entries {
        for policy in &policies {
            for (seed, k) in [(0, 0), (3, 5)] {
                let cfg = SolveConfig { k_random: k, ..SolveConfig::seeded(seed) };
                let mut a = solve_timed(inst, &cfg, policy, &mut NoObserver).unwrap();
                let mut b = solve_timed(inst, &cfg, policy, &mut NoObserver).unwrap();
                if trace_jsonl(&a.trace) != trace_jsonl(&b.trace) {
                    bad.push(format!("trace {} {}", inst.name, policy.id()));
                }
                a.wall_time = 0.0;
                b.wall_time = 0.0;
                a.primal_dual_integral = 0.0;
                b.primal_dual_integral = 0.0;
                if serde_json::to_vec(&a).unwrap() != serde_json::to_vec(&b).unwrap() {
                    bad.push(format!("report {} {}", inst.name, policy.id()));
                }
                traces += 1;
            }
        }
    }

    // shards and manifests
    let (x, y) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let opts = CollectOptions { formats: vec![ShardFormat::Jsonl, ShardFormat::Bin], ..CollectOptions::default() };
    let grid = SplitGrid { seeds: vec![0, 2], ks: vec![0, 10] };
    let mx = collect(&suite, SplitName::Train, &grid, &opts, x.path()).unwrap();
    let my = collect(&suite, SplitName::Train, &grid, &CollectOptions { jobs: 3, ..opts }, y.path()).unwrap();
    let mut shards = 0;
    for (e, f) in mx.shards.iter().zip(&my.shards) {
        if std::fs::read(x.path().join(&e.path)).unwrap() != std::fs::read(y.path().join(&f.path)).unwrap() {
            bad.push(format!("shard {}", e.path.display()));
        }
        shards += 1;
    }
    if std::fs::read(x.path().join("manifest.json")).unwrap() != std::fs::read(y.path().join("manifest.json")).unwrap() {
        bad.push("manifest".into());
    }

    // checkpoints
    let mut grids = BTreeMap::new();
    grids.insert(SplitName::Train, grid);
    let data = assemble_splits(x.path(), &mx, &grids, &BTreeSet::new()).unwrap();
    let cfg = TrainConfig { epochs: 4, milestones: vec![2, 3], ..TrainConfig::default() };
    for kind in [NetKind::NoTree, NetKind::TreeGate] {
        let spec = NetSpec::new(kind, 32, 2).unwrap();
        let (a, _) = train_policy(&data, spec, 9, &cfg).unwrap();
        let (b, _) = train_policy(&data, spec, 9, &cfg).unwrap();
        a.save(&x.path().join("a.json")).unwrap();
        b.save(&x.path().join("b.json")).unwrap();
        if std::fs::read(x.path().join("a.json")).unwrap() != std::fs::read(x.path().join("b.json")).unwrap() {
            bad.push(format!("checkpoint {kind:?}"));
        }
    }
    for b in &bad {
        note(&format!("    differs: {b}\n"));
    }
    c.finish(bad.is_empty(), &format!("{traces} trace pairs, {shards} shard pairs, 2 checkpoint pairs, {} differences", bad.len()));
}
