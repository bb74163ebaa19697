//! The `branchlab` command line.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use branchlab_core::dataset::{SplitGrid, SplitName};
use branchlab_core::milp::{benchmark_suite, generate_instance, Family, InstanceSet, Split};
use branchlab_core::neural::{NetKind, NetSpec, TrainConfig};
use branchlab_core::{BranchEvent, BranchObserver, SolveConfig, SolveStatus};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::collect::{assemble_splits, collect, observed_grids, CollectOptions};
use crate::config::{parse_list, ConfigError, RunConfig};
use crate::eval::{evaluate_policies, parse_runs_jsonl, runs_jsonl, summarize, EvalOptions};
use crate::io::{
    atomic_write, expand_globs, read_instance, read_suite, read_to_string, write_json, write_suite, IoError,
};
use crate::run::{annotate_optimum, parse_policy, reference_optimum, solve_timed, trace_jsonl, write_report};
use crate::shard::{Manifest, ShardFormat};
use crate::train::{curves_csv, train_policy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_LIMIT: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "branchlab", version, about = "Learned branching for a small MILP branch-and-bound solver")]
pub struct Cli {
    /// JSON file with default settings; command-line flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic instance suite with a suite.json index
    Generate(GenerateArgs),
    /// Solve one instance and write report.json (and trace.jsonl)
    Solve(SolveArgs),
    /// Roll out the expert and write imitation shards
    Collect(CollectArgs),
    /// Train a NoTree or TreeGate policy on collected shards
    Train(TrainArgs),
    /// Evaluate policies over a suite and tabulate node counts
    Eval(EvalArgs),
    /// Write the features seen at every branching of one solve
    FeaturesDump(DumpArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// benchmark, packing, knapsack or set-cover
    #[arg(long)]
    pub family: Option<String>,
    /// Number of train instances
    #[arg(long)]
    pub count: Option<usize>,
    /// Number of test instances
    #[arg(long)]
    pub test_count: Option<usize>,
    /// Variables (or items, or elements) per instance; ignored by benchmark
    #[arg(long)]
    pub size: Option<usize>,
    /// First generator seed; ignored by benchmark
    #[arg(long)]
    pub seed: Option<u64>,
    /// Instance file format: json or mps
    #[arg(long)]
    pub format: Option<String>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance file (.mps or .json)
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// random, pscost, strong, expert, learned, or NAME=CHECKPOINT
    #[arg(long)]
    pub policy: Option<String>,
    /// Checkpoint for a learned policy
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Seed of the random rule and of the variable permutation
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of initial random branchings
    #[arg(long)]
    pub k: Option<u64>,
    /// Objective cutoff
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Use the instance optimum as cutoff
    #[arg(long)]
    pub cutoff_known: bool,
    /// Seconds
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Stop after this many processed nodes
    #[arg(long)]
    pub node_limit: Option<u64>,
    /// Also write trace.jsonl
    #[arg(long)]
    pub trace: bool,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    /// Suite index written by `generate`
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Instance files or glob patterns, used instead of --suite
    #[arg(long, num_args = 1..)]
    pub instances: Option<Vec<String>>,
    /// Split tag of --instances: train or test
    #[arg(long)]
    pub instance_split: Option<String>,
    /// Data split to collect: train, valid or test
    #[arg(long)]
    pub split: Option<String>,
    /// Seeds, e.g. 0,1,2,3 or 0-3 (default: the split's grid)
    #[arg(long)]
    pub seeds: Option<String>,
    /// Random-prefix lengths, e.g. 0,1,5,10,15 (default: the split's grid)
    #[arg(long)]
    pub ks: Option<String>,
    /// Shard encodings: jsonl, bin or jsonl,bin
    #[arg(long)]
    pub formats: Option<String>,
    /// Seconds per rollout
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Stop after this many processed nodes
    #[arg(long)]
    pub node_limit: Option<u64>,
    /// Worker threads
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Dataset directory (holds manifest.json)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory written by `collect`
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// notree or treegate (default treegate)
    #[arg(long)]
    pub arch: Option<String>,
    /// Hidden size (default 64)
    #[arg(long)]
    pub h: Option<usize>,
    /// Tree-path depth (default 5)
    #[arg(long)]
    pub d: Option<usize>,
    /// Adam learning rate (default 0.01)
    #[arg(long)]
    pub lr: Option<f64>,
    /// Training epochs (default 40)
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size (default 32)
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// L2 weight decay (default 1e-5)
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Initialization and shuffling seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Suite index written by `generate`
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Instance files or glob patterns, used instead of --suite
    #[arg(long, num_args = 1..)]
    pub instances: Option<Vec<String>>,
    /// Split tag of --instances: train or test
    #[arg(long)]
    pub instance_split: Option<String>,
    /// Comma-separated policies, e.g. notree,treegate,random,pscost,expert
    #[arg(long)]
    pub policies: Option<String>,
    /// Checkpoint of a learned policy as NAME=PATH (repeatable)
    #[arg(long = "model", value_name = "NAME=PATH")]
    pub models: Vec<String>,
    /// Seeds, e.g. 0-4
    #[arg(long)]
    pub seeds: Option<String>,
    /// Seconds per run
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Stop after this many processed nodes
    #[arg(long)]
    pub node_limit: Option<u64>,
    /// Worker threads
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Rebuild the tables from an existing runs.jsonl instead of solving
    #[arg(long)]
    pub from_runs: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    /// Instance file (.mps or .json)
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Branching policy driving the solve (default expert)
    #[arg(long)]
    pub policy: Option<String>,
    /// Checkpoint for a learned policy
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Seed of the random rule and of the variable permutation
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of initial random branchings
    #[arg(long)]
    pub k: Option<u64>,
    /// Use the instance optimum as cutoff
    #[arg(long)]
    pub cutoff_known: bool,
    /// Seconds
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Stop after this many processed nodes
    #[arg(long)]
    pub node_limit: Option<u64>,
    /// Output directory (features.jsonl)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Other(String),
}

fn other(e: impl std::fmt::Display) -> CliError {
    CliError::Other(e.to_string())
}

fn invalid(key: &'static str, message: impl Into<String>) -> CliError {
    ConfigError::Invalid { key, message: message.into() }.into()
}

fn list(key: &'static str, s: &Option<String>) -> Result<Option<Vec<u64>>, CliError> {
    s.as_deref().map(parse_list).transpose().map_err(|m| invalid(key, m))
}

fn split_tag(s: &Option<String>) -> Result<Option<Split>, CliError> {
    match s.as_deref() {
        None => Ok(None),
        Some("train") => Ok(Some(Split::Train)),
        Some("test") => Ok(Some(Split::Test)),
        Some(o) => Err(invalid("instance-split", format!("`{o}` is not train or test"))),
    }
}

fn commas(s: &Option<String>) -> Option<Vec<String>> {
    s.as_ref().map(|s| s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(String::from).collect())
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Solve(_) => "solve",
            Command::Collect(_) => "collect",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::FeaturesDump(_) => "features-dump",
        }
    }

    /// The settings given on the command line.
    fn flags(&self) -> Result<RunConfig, CliError> {
        let mut c = RunConfig { command: Some(self.name().to_string()), ..RunConfig::default() };
        match self {
            Command::Generate(a) => {
                c.family = a.family.clone();
                c.count = a.count;
                c.test_count = a.test_count;
                c.size = a.size;
                c.seed = a.seed;
                c.format = a.format.clone();
                c.out = a.out.clone();
            }
            Command::Solve(a) => {
                c.instance = a.instance.clone();
                c.policy = a.policy.clone();
                c.model = a.model.clone();
                c.seed = a.seed;
                c.k = a.k;
                c.cutoff = a.cutoff;
                c.cutoff_known = a.cutoff_known.then_some(true);
                c.time_limit = a.time_limit;
                c.node_limit = a.node_limit;
                c.trace = a.trace.then_some(true);
                c.out = a.out.clone();
            }
            Command::Collect(a) => {
                c.suite = a.suite.clone();
                c.instances = a.instances.clone();
                c.instance_split = split_tag(&a.instance_split)?;
                c.split = a.split.as_deref().map(str::parse).transpose().map_err(|e| invalid("split", format!("{e}")))?;
                c.seeds = list("seeds", &a.seeds)?;
                c.ks = list("ks", &a.ks)?;
                c.formats = commas(&a.formats)
                    .map(|v| {
                        v.iter()
                            .map(|f| match f.as_str() {
                                "jsonl" => Ok(ShardFormat::Jsonl),
                                "bin" => Ok(ShardFormat::Bin),
                                o => Err(invalid("formats", format!("`{o}` is not jsonl or bin"))),
                            })
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .transpose()?;
                c.time_limit = a.time_limit;
                c.node_limit = a.node_limit;
                c.jobs = a.jobs;
                c.out = a.out.clone();
            }
            Command::Train(a) => {
                c.data = a.data.clone();
                c.arch = match a.arch.as_deref() {
                    None => None,
                    Some("notree") => Some(NetKind::NoTree),
                    Some("treegate") => Some(NetKind::TreeGate),
                    Some(o) => return Err(invalid("arch", format!("`{o}` is not notree or treegate"))),
                };
                c.h = a.h;
                c.d = a.d;
                c.lr = a.lr;
                c.epochs = a.epochs;
                c.batch_size = a.batch_size;
                c.weight_decay = a.weight_decay;
                c.seed = a.seed;
                c.out = a.out.clone();
            }
            Command::Eval(a) => {
                c.suite = a.suite.clone();
                c.instances = a.instances.clone();
                c.instance_split = split_tag(&a.instance_split)?;
                c.policies = commas(&a.policies);
                if !a.models.is_empty() {
                    let mut m = BTreeMap::new();
                    for spec in &a.models {
                        let (name, path) =
                            spec.split_once('=').ok_or_else(|| invalid("model", format!("`{spec}` is not NAME=PATH")))?;
                        m.insert(name.to_string(), PathBuf::from(path));
                    }
                    c.models = Some(m);
                }
                c.seeds = list("seeds", &a.seeds)?;
                c.time_limit = a.time_limit;
                c.node_limit = a.node_limit;
                c.jobs = a.jobs;
                c.from_runs = a.from_runs.clone();
                c.out = a.out.clone();
            }
            Command::FeaturesDump(a) => {
                c.instance = a.instance.clone();
                c.policy = a.policy.clone();
                c.model = a.model.clone();
                c.seed = a.seed;
                c.k = a.k;
                c.cutoff_known = a.cutoff_known.then_some(true);
                c.time_limit = a.time_limit;
                c.node_limit = a.node_limit;
                c.out = a.out.clone();
            }
        }
        Ok(c)
    }
}

/// Outcome of a successful command: the exit code and a summary for stdout.
struct Done {
    code: i32,
    summary: String,
}

impl Done {
    fn ok(summary: String) -> Self {
        Done { code: EXIT_OK, summary }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(&cli) {
        Ok(done) => {
            let _ = write!(stdout, "{}", done.summary);
            done.code
        }
        Err(CliError::Config(e @ (ConfigError::Missing(_) | ConfigError::Invalid { .. } | ConfigError::Command { .. }))) => {
            let _ = writeln!(stderr, "error: {e}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

/// Merges config file and flags and dispatches.
fn execute(cli: &Cli) -> Result<Done, CliError> {
    let name = cli.command.name();
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(found) = &cfg.command {
        if found != name {
            return Err(ConfigError::Command { found: found.clone(), expected: name.to_string() }.into());
        }
    }
    cfg.overlay(&cli.command.flags()?);
    match &cli.command {
        Command::Generate(_) => cmd_generate(&cfg),
        Command::Solve(_) => cmd_solve(&cfg),
        Command::Collect(_) => cmd_collect(&cfg),
        Command::Train(_) => cmd_train(&cfg),
        Command::Eval(_) => cmd_eval(&cfg),
        Command::FeaturesDump(_) => cmd_dump(&cfg),
    }
}

fn save_config(dir: &Path, cfg: &RunConfig) -> Result<(), IoError> {
    let mut resolved = cfg.clone();
    resolved.out = Some(dir.to_path_buf());
    write_json(&dir.join("run_config.json"), &resolved)
}

fn cmd_generate(cfg: &RunConfig) -> Result<Done, CliError> {
    let family = cfg.family.clone().unwrap_or_else(|| "benchmark".into());
    let format = cfg.format.clone().unwrap_or_else(|| "json".into());
    if format != "json" && format != "mps" {
        return Err(invalid("format", format!("`{format}` is not json or mps")));
    }
    let seed = cfg.seed.unwrap_or(0);
    let mut set = if family == "benchmark" {
        benchmark_suite(cfg.count.unwrap_or(20), cfg.test_count.unwrap_or(6)).map_err(other)?
    } else {
        let count = cfg.count.unwrap_or(10);
        let test = cfg.test_count.unwrap_or(0);
        let size = cfg.size.unwrap_or(10);
        let fam = match family.as_str() {
            "knapsack" => Family::Knapsack { items: size },
            "set-cover" => Family::SetCover { elements: size, sets: size },
            "packing" => Family::Packing { vars: size, rows: (size / 2).max(1), max_value: 2 },
            o => return Err(invalid("family", format!("`{o}` is not benchmark, packing, knapsack or set-cover"))),
        };
        let mut entries = Vec::new();
        for i in 0..(count + test) as u64 {
            let inst = generate_instance(fam, seed + i).map_err(|e| invalid("size", e.to_string()))?;
            entries.push((inst, if (i as usize) < count { Split::Train } else { Split::Test }));
        }
        InstanceSet::new(entries).map_err(other)?
    };
    for (inst, _) in &mut set.entries {
        annotate_optimum(inst).map_err(|e| other(format!("{}: {e}", inst.name)))?;
    }
    let out = cfg.out_dir("suite");
    let index = write_suite(&out, &set, &format)?;
    save_config(&out, cfg)?;
    Ok(Done::ok(format!("wrote {} instances to {}\n", set.entries.len(), index.display())))
}

/// Loads `--suite` or the `--instances` globs.
fn load_instances(cfg: &RunConfig) -> Result<InstanceSet, CliError> {
    match (&cfg.suite, &cfg.instances) {
        (Some(suite), None) => Ok(read_suite(suite)?),
        (None, Some(globs)) => {
            let split = cfg.instance_split.unwrap_or(Split::Train);
            let mut entries = Vec::new();
            for path in expand_globs(globs)? {
                entries.push((read_instance(&path)?, split));
            }
            InstanceSet::new(entries).map_err(other)
        }
        (Some(_), Some(_)) => Err(invalid("suite", "give either --suite or --instances, not both")),
        (None, None) => Err(ConfigError::Missing("suite").into()),
    }
}

fn solve_config(cfg: &RunConfig, inst: &branchlab_core::MilpInstance) -> Result<SolveConfig, CliError> {
    let mut sc = SolveConfig {
        time_limit: cfg.time_limit.unwrap_or(3600.0),
        node_limit: cfg.node_limit,
        k_random: cfg.k.unwrap_or(0),
        ..SolveConfig::seeded(cfg.seed.unwrap_or(0))
    };
    if !(sc.time_limit > 0.0) {
        return Err(invalid("time-limit", "must be positive"));
    }
    sc.cutoff = match (cfg.cutoff, cfg.cutoff_known.unwrap_or(false)) {
        (Some(_), true) => return Err(invalid("cutoff", "give either --cutoff or --cutoff-known, not both")),
        (Some(v), false) => Some(v),
        (None, true) => Some(
            reference_optimum(inst)
                .map_err(|e| other(format!("{}: {e}", inst.name)))?
                .ok_or_else(|| other(format!("{} is infeasible; it has no optimum to use as cutoff", inst.name)))?,
        ),
        (None, false) => None,
    };
    Ok(sc)
}

fn single_policy(cfg: &RunConfig, default: &str) -> Result<crate::run::NamedPolicy, CliError> {
    let token = cfg.policy.clone().unwrap_or_else(|| default.into());
    let mut models = BTreeMap::new();
    if let Some(m) = &cfg.model {
        models.insert(token.clone(), m.clone());
    }
    parse_policy(&token, &models).map_err(other)
}

fn cmd_solve(cfg: &RunConfig) -> Result<Done, CliError> {
    let path = RunConfig::require(&cfg.instance, "instance")?;
    let named = single_policy(cfg, "pscost")?;
    let inst = read_instance(&path)?;
    let sc = solve_config(cfg, &inst)?;
    let report = solve_timed(&inst, &sc, &named.policy, &mut branchlab_core::bnb::NoObserver)
        .map_err(|e| other(format!("{}: {e}", path.display())))?;
    let out = cfg.out_dir("solve");
    write_report(&out, &report, cfg.trace.unwrap_or(false))?;
    save_config(&out, cfg)?;
    let value = report.value.map_or("none".to_string(), |v| format!("{v}"));
    let summary = format!(
        "{} {} status={} value={} nodes={} fair_nodes={} time={:.3}s\n",
        report.instance,
        named.label,
        report.status.as_str(),
        value,
        report.nodes,
        report.fair_nodes,
        report.wall_time
    );
    let code = if report.status.is_limit() { EXIT_LIMIT } else { EXIT_OK };
    Ok(Done { code, summary })
}

fn cmd_collect(cfg: &RunConfig) -> Result<Done, CliError> {
    let split: SplitName = RunConfig::require(&cfg.split, "split")?;
    let standard = SplitGrid::standard(split);
    let grid = SplitGrid {
        seeds: cfg.seeds.clone().unwrap_or_else(|| standard.seeds.clone()),
        ks: cfg.ks.clone().unwrap_or_else(|| standard.ks.clone()),
    };
    for (s, k) in grid.pairs() {
        if !standard.contains(s, k) {
            return Err(invalid("seeds", format!("seed {s} with k {k} is outside the {split} grid")));
        }
    }
    let set = load_instances(cfg)?;
    let opts = CollectOptions {
        time_limit: cfg.time_limit.unwrap_or(3600.0),
        node_limit: cfg.node_limit,
        formats: cfg.formats.clone().unwrap_or_else(|| vec![ShardFormat::Jsonl]),
        jobs: cfg.jobs.unwrap_or(1),
        ..CollectOptions::default()
    };
    if opts.formats.is_empty() {
        return Err(invalid("formats", "at least one format is needed"));
    }
    let out = cfg.out_dir("data");
    let manifest = collect(&set, split, &grid, &opts, &out).map_err(other)?;
    save_config(&out, cfg)?;
    let counts = manifest.counts();
    Ok(Done::ok(format!(
        "{split}: {} shards listed, {} data points in the {split} split\n",
        manifest.shards.iter().filter(|e| e.split == split).count(),
        counts.get(&split).copied().unwrap_or(0)
    )))
}

fn cmd_train(cfg: &RunConfig) -> Result<Done, CliError> {
    let data = RunConfig::require(&cfg.data, "data")?;
    let kind = cfg.arch.unwrap_or(NetKind::TreeGate);
    let spec = NetSpec::new(kind, cfg.h.unwrap_or(64), cfg.d.unwrap_or(5)).map_err(|e| invalid("h", e.to_string()))?;
    let seed = cfg.seed.unwrap_or(0);
    let defaults = TrainConfig::default();
    let tc = TrainConfig {
        epochs: cfg.epochs.unwrap_or(defaults.epochs),
        lr: cfg.lr.unwrap_or(defaults.lr),
        batch_size: cfg.batch_size.unwrap_or(defaults.batch_size),
        weight_decay: cfg.weight_decay.unwrap_or(defaults.weight_decay),
        seed,
        ..defaults
    };
    let manifest = Manifest::load(&data)?;
    let assembled = assemble_splits(&data, &manifest, &observed_grids(&manifest), &BTreeSet::new()).map_err(other)?;
    let (ckpt, summary) = train_policy(&assembled, spec, seed, &tc).map_err(other)?;
    let out = cfg.out_dir("model");
    ckpt.save(&out.join("checkpoint.json")).map_err(other)?;
    atomic_write(&out.join("curves.csv"), curves_csv(&ckpt).as_bytes())?;
    atomic_write(&out.join("candidates_hist.csv"), assembled.candidate_histogram_csv().as_bytes())?;
    atomic_write(&out.join("labels_hist.csv"), assembled.label_histogram_csv().as_bytes())?;
    write_json(&out.join("summary.json"), &summary)?;
    save_config(&out, cfg)?;
    let mut text = String::new();
    for w in &assembled.warnings {
        text.push_str(&format!("warning: {w}\n"));
    }
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}%", 100.0 * x));
    text.push_str(&format!(
        "{} h={} d={}: train loss {:.4}, valid top-1 {}, test top-1 {}\n",
        match kind {
            NetKind::NoTree => "notree",
            NetKind::TreeGate => "treegate",
        },
        spec.hidden,
        spec.depth,
        summary.final_train_loss,
        pct(summary.valid_top1),
        pct(summary.test_top1)
    ));
    Ok(Done::ok(text))
}

fn cmd_eval(cfg: &RunConfig) -> Result<Done, CliError> {
    let out = cfg.out_dir("eval");
    let runs = match &cfg.from_runs {
        Some(path) => parse_runs_jsonl(&read_to_string(path)?).map_err(|e| other(format!("{}: {e}", path.display())))?,
        None => {
            let set = load_instances(cfg)?;
            let models = cfg.models.clone().unwrap_or_default();
            let tokens = cfg.policies.clone().unwrap_or_else(|| vec!["random".into(), "pscost".into(), "expert".into()]);
            if tokens.is_empty() {
                return Err(invalid("policies", "no policy given"));
            }
            let policies =
                tokens.iter().map(|t| parse_policy(t, &models)).collect::<Result<Vec<_>, _>>().map_err(other)?;
            let opts = EvalOptions {
                seeds: cfg.seeds.clone().unwrap_or_else(|| (0..5).collect()),
                time_limit: cfg.time_limit.unwrap_or(3600.0),
                node_limit: cfg.node_limit,
                jobs: cfg.jobs.unwrap_or(1),
            };
            let runs = evaluate_policies(&set, &policies, &opts).map_err(other)?;
            atomic_write(&out.join("runs.jsonl"), &runs_jsonl(&runs))?;
            runs
        }
    };
    let table = summarize(&runs).map_err(other)?;
    let text = table.to_text();
    atomic_write(&out.join("report.csv"), table.to_csv().as_bytes())?;
    atomic_write(&out.join("report.txt"), text.as_bytes())?;
    save_config(&out, cfg)?;
    Ok(Done::ok(text))
}

#[derive(Serialize)]
struct DumpRecord {
    t: u64,
    tree: Vec<f64>,
    candidates: Vec<Vec<f64>>,
    candidate_ids: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
}

#[derive(Default)]
struct Dumper {
    lines: Vec<u8>,
    records: usize,
}

impl BranchObserver for Dumper {
    fn wants_features(&self) -> bool {
        true
    }

    fn on_branch(&mut self, e: &BranchEvent<'_>) {
        let (m, t) = e.features.expect("dumper asks for features");
        let rec = DumpRecord {
            t: e.step,
            tree: t.values.clone(),
            candidates: m.columns.iter().map(|c| c.to_vec()).collect(),
            candidate_ids: e.candidates.to_vec(),
            label: (!e.random).then_some(e.chosen),
        };
        serde_json::to_writer(&mut self.lines, &rec).expect("feature records serialize");
        self.lines.push(b'\n');
        self.records += 1;
    }
}

fn cmd_dump(cfg: &RunConfig) -> Result<Done, CliError> {
    let path = RunConfig::require(&cfg.instance, "instance")?;
    let named = single_policy(cfg, "expert")?;
    let inst = read_instance(&path)?;
    let sc = solve_config(cfg, &inst)?;
    let mut dumper = Dumper::default();
    let report =
        solve_timed(&inst, &sc, &named.policy, &mut dumper).map_err(|e| other(format!("{}: {e}", path.display())))?;
    let out = cfg.out_dir("features");
    atomic_write(&out.join("features.jsonl"), &dumper.lines)?;
    atomic_write(&out.join("trace.jsonl"), &trace_jsonl(&report.trace))?;
    save_config(&out, cfg)?;
    let code = if report.status == SolveStatus::TimeLimit || report.status == SolveStatus::NodeLimit {
        EXIT_LIMIT
    } else {
        EXIT_OK
    };
    Ok(Done { code, summary: format!("wrote {} branching records to {}\n", dumper.records, out.display()) })
}
