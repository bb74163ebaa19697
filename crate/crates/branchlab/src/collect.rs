//! Expert rollouts, shard writing and split assembly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use branchlab_core::dataset::{
    check_source, histogram_candidates, histogram_labels, DataPoint, DatasetError, Provenance, SplitGrid, SplitName,
    Source,
};
use branchlab_core::milp::{InstanceSet, Split};
use branchlab_core::{BranchEvent, BranchObserver, MilpInstance, Policy, SolveConfig, SolveError, SolveStatus};
use rayon::prelude::*;

use crate::io::IoError;
use crate::run::{reference_optimum, solve_timed};
use crate::shard::{read_shard, write_shard, Manifest, ShardEntry, ShardError, ShardFlag, ShardFormat};

#[derive(Debug, thiserror::Error)]
pub enum CollectError {
    #[error("{instance}: {source}")]
    Solve { instance: String, source: SolveError },
    #[error("{0} is infeasible; collection needs a finite cutoff")]
    Infeasible(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Debug)]
pub struct CollectOptions {
    pub time_limit: f64,
    pub node_limit: Option<u64>,
    pub formats: Vec<ShardFormat>,
    pub jobs: usize,
    pub expert: Policy,
}

impl Default for CollectOptions {
    fn default() -> Self {
        CollectOptions {
            time_limit: 3600.0,
            node_limit: None,
            formats: vec![ShardFormat::Jsonl],
            jobs: 1,
            expert: Policy::expert(),
        }
    }
}

/// Records one data point per expert branching; random-prefix branchings
/// are skipped.
pub struct Recorder {
    pub instance: String,
    pub seed: u64,
    pub k: u64,
    pub points: Vec<DataPoint>,
    pub prefix_branchings: u64,
}

impl BranchObserver for Recorder {
    fn wants_features(&self) -> bool {
        true
    }

    fn on_branch(&mut self, e: &BranchEvent<'_>) {
        if e.random {
            self.prefix_branchings += 1;
            return;
        }
        let (m, t) = e.features.expect("recorder asks for features");
        self.points.push(DataPoint {
            tree: t.clone(),
            candidates: m.clone(),
            label: e.chosen,
            provenance: Provenance { instance: self.instance.clone(), seed: self.seed, k: self.k, step: e.step },
        });
    }
}

/// Runs one `(instance, seed, k)` rollout and returns its points and flags.
pub fn rollout(
    inst: &MilpInstance,
    cutoff: f64,
    seed: u64,
    k: u64,
    opts: &CollectOptions,
) -> Result<(Vec<DataPoint>, Vec<ShardFlag>, u64, SolveStatus), SolveError> {
    let cfg = SolveConfig {
        time_limit: opts.time_limit,
        node_limit: opts.node_limit,
        cutoff: Some(cutoff),
        k_random: k,
        ..SolveConfig::seeded(seed)
    };
    let mut rec = Recorder { instance: inst.name.clone(), seed, k, points: Vec::new(), prefix_branchings: 0 };
    let report = solve_timed(inst, &cfg, &opts.expert, &mut rec)?;
    let mut flags = Vec::new();
    if report.status.is_limit() {
        flags.push(ShardFlag::Partial);
    }
    if report.branchings == 0 {
        flags.push(ShardFlag::Empty);
    } else if rec.points.is_empty() && k > 0 {
        flags.push(ShardFlag::PrefixExhausted);
    }
    Ok((rec.points, flags, report.nodes, report.status))
}

pub fn shard_path(split: SplitName, instance: &str, seed: u64, k: u64, format: ShardFormat) -> PathBuf {
    PathBuf::from("shards").join(split.as_str()).join(format!("{instance}_s{seed}_k{k}.{}", format.extension()))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CollectError> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| CollectError::Pool(e.to_string()))
}

/// Collects every `(instance, seed, k)` of `grid` over the instances that
/// feed `split`, writes shards under `out` and merges them into the
/// manifest there.
pub fn collect(
    set: &InstanceSet,
    split: SplitName,
    grid: &SplitGrid,
    opts: &CollectOptions,
    out: &Path,
) -> Result<Manifest, CollectError> {
    let instances: Vec<&MilpInstance> = set.with_split(split.instance_split()).collect();
    let pool = pool(opts.jobs)?;
    let entries: Vec<ShardEntry> = pool.install(|| -> Result<Vec<ShardEntry>, CollectError> {
        let cutoffs: Vec<f64> = instances
            .par_iter()
            .map(|inst| {
                reference_optimum(inst)
                    .map_err(|source| CollectError::Solve { instance: inst.name.clone(), source })?
                    .ok_or_else(|| CollectError::Infeasible(inst.name.clone()))
            })
            .collect::<Result<_, _>>()?;
        let work: Vec<(usize, u64, u64)> =
            (0..instances.len()).flat_map(|i| grid.pairs().map(move |(s, k)| (i, s, k))).collect();
        let nested: Vec<Vec<ShardEntry>> = work
            .par_iter()
            .map(|&(i, seed, k)| {
                let inst = instances[i];
                let (points, flags, nodes, status) = rollout(inst, cutoffs[i], seed, k, opts)
                    .map_err(|source| CollectError::Solve { instance: inst.name.clone(), source })?;
                let mut out_entries = Vec::new();
                for &format in &opts.formats {
                    let path = shard_path(split, &inst.name, seed, k, format);
                    let sha256 = write_shard(&out.join(&path), format, &points)?;
                    out_entries.push(ShardEntry {
                        split,
                        instance: inst.name.clone(),
                        instance_split: split.instance_split(),
                        seed,
                        k,
                        format,
                        path,
                        points: points.len(),
                        sha256,
                        flags: flags.clone(),
                        nodes,
                        status: status.as_str().to_string(),
                    });
                }
                Ok(out_entries)
            })
            .collect::<Result<_, CollectError>>()?;
        Ok(nested.into_iter().flatten().collect())
    })?;
    let mut manifest = Manifest::load_or_new(out)?;
    manifest.merge(entries);
    manifest.save(out)?;
    Ok(manifest)
}

#[derive(Debug, thiserror::Error)]
pub enum AssembleError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Shard(#[from] ShardError),
    #[error("instance {instance} feeds both the test split and the {split} split")]
    Leakage { instance: String, split: SplitName },
    #[error("missing shard for {split} source {instance} (seed {seed}, k {k})")]
    MissingShard { split: SplitName, instance: String, seed: u64, k: u64 },
    #[error("manifest was written for feature layout `{found}`, expected `{expected}`")]
    FeatureVersion { found: String, expected: String },
    #[error("{source} (instance {instance}, seed {seed}, k {k}, step {step})")]
    BadPoint { instance: String, seed: u64, k: u64, step: u64, source: DatasetError },
}

#[derive(Clone, Debug, Default)]
pub struct Assembled {
    pub splits: BTreeMap<SplitName, Vec<DataPoint>>,
    pub sources: BTreeMap<SplitName, Vec<Source>>,
    pub warnings: Vec<String>,
}

impl Assembled {
    pub fn get(&self, split: SplitName) -> &[DataPoint] {
        self.splits.get(&split).map_or(&[], Vec::as_slice)
    }

    pub fn counts(&self) -> BTreeMap<SplitName, usize> {
        self.splits.iter().map(|(s, v)| (*s, v.len())).collect()
    }

    /// `split,size,count` rows of the candidate-set size histogram.
    pub fn candidate_histogram_csv(&self) -> String {
        let mut out = String::from("split,candidates,count\n");
        for (split, pts) in &self.splits {
            for (size, count) in histogram_candidates(pts) {
                let _ = writeln!(out, "{split},{size},{count}");
            }
        }
        out
    }

    /// `split,position,count` rows of the expert label histogram.
    pub fn label_histogram_csv(&self) -> String {
        let mut out = String::from("split,label,count\n");
        for (split, pts) in &self.splits {
            for (pos, count) in histogram_labels(pts) {
                let _ = writeln!(out, "{split},{pos},{count}");
            }
        }
        out
    }
}

/// Builds the requested splits from the shards listed in `manifest`. Every
/// grid pair of every instance seen in a split must have a shard unless it
/// is in `waived`.
pub fn assemble_splits(
    dir: &Path,
    manifest: &Manifest,
    grids: &BTreeMap<SplitName, SplitGrid>,
    waived: &BTreeSet<Source>,
) -> Result<Assembled, AssembleError> {
    if manifest.feature_version != branchlab_core::FEATURE_VERSION {
        return Err(AssembleError::FeatureVersion {
            found: manifest.feature_version.clone(),
            expected: branchlab_core::FEATURE_VERSION.to_string(),
        });
    }
    let test_instances: BTreeSet<&str> = manifest
        .shards
        .iter()
        .filter(|e| e.split == SplitName::Test || e.instance_split == Split::Test)
        .map(|e| e.instance.as_str())
        .collect();
    let mut out = Assembled::default();
    for (&split, grid) in grids {
        // prefer the exact JSON encoding when both exist
        let mut chosen: BTreeMap<Source, &ShardEntry> = BTreeMap::new();
        for e in manifest.shards.iter().filter(|e| e.split == split) {
            let src = Source { instance: e.instance.clone(), seed: e.seed, k: e.k };
            check_source(split, grid, &src, e.instance_split)?;
            if split != SplitName::Test && test_instances.contains(e.instance.as_str()) {
                return Err(AssembleError::Leakage { instance: e.instance.clone(), split });
            }
            let slot = chosen.entry(src).or_insert(e);
            if e.format == ShardFormat::Jsonl {
                *slot = e;
            }
        }
        let instances: BTreeSet<&str> = chosen.keys().map(|s| s.instance.as_str()).collect();
        for inst in &instances {
            for (seed, k) in grid.pairs() {
                let src = Source { instance: inst.to_string(), seed, k };
                if chosen.contains_key(&src) {
                    continue;
                }
                if waived.contains(&src) {
                    out.warnings.push(format!("{split}: waived missing shard {inst} seed {seed} k {k}"));
                    continue;
                }
                return Err(AssembleError::MissingShard { split, instance: inst.to_string(), seed, k });
            }
        }
        let mut points = Vec::new();
        for (src, entry) in &chosen {
            let pts = read_shard(dir, entry)?;
            if pts.is_empty() {
                out.warnings.push(format!("{split}: shard {} (seed {}, k {}) is empty", src.instance, src.seed, src.k));
            }
            for p in &pts {
                p.validate().map_err(|source| AssembleError::BadPoint {
                    instance: src.instance.clone(),
                    seed: src.seed,
                    k: src.k,
                    step: p.provenance.step,
                    source,
                })?;
            }
            points.extend(pts);
        }
        out.sources.insert(split, chosen.into_keys().collect());
        out.splits.insert(split, points);
    }
    Ok(out)
}

/// Per split, the seeds and prefix lengths that appear in `manifest`. A
/// reduced collection assembles against these instead of the full grids.
pub fn observed_grids(manifest: &Manifest) -> BTreeMap<SplitName, SplitGrid> {
    let mut seen: BTreeMap<SplitName, (BTreeSet<u64>, BTreeSet<u64>)> = BTreeMap::new();
    for e in &manifest.shards {
        let (seeds, ks) = seen.entry(e.split).or_default();
        seeds.insert(e.seed);
        ks.insert(e.k);
    }
    seen.into_iter()
        .map(|(s, (seeds, ks))| (s, SplitGrid { seeds: seeds.into_iter().collect(), ks: ks.into_iter().collect() }))
        .collect()
}

/// The three standard grids.
pub fn standard_grids() -> BTreeMap<SplitName, SplitGrid> {
    SplitName::ALL.iter().map(|&s| (s, SplitGrid::standard(s))).collect()
}
