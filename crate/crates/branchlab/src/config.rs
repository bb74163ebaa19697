//! Run configuration: command-line flags over a JSON file over defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use branchlab_core::dataset::SplitName;
use branchlab_core::milp::Split;
use branchlab_core::neural::NetKind;
use serde::{Deserialize, Serialize};

use crate::io::{read_json, IoError};
use crate::shard::ShardFormat;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "BRANCHLAB_OUT";
pub const DEFAULT_OUT: &str = "branchlab-out";

/// Every setting a subcommand may take. All fields are optional so that a
/// config file can set any subset; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instances: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance_split: Option<Split>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub models: Option<BTreeMap<String, PathBuf>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arch: Option<NetKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<ShardFormat>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_limit: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff_known: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from_runs: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("config file is for `{found}`, not `{expected}`")]
    Command { found: String, expected: String },
    #[error("missing setting `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Ok(read_json(path)?)
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(&mut self, top: &RunConfig) {
        overlay!(self, top; command, instance, instances, suite, instance_split, policy, policies, model, models,
            arch, h, d, lr, epochs, batch_size, weight_decay, seed, seeds, k, ks, split, formats, data, out,
            time_limit, node_limit, cutoff, cutoff_known, trace, jobs, family, size, count, test_count, format,
            from_runs);
    }

    /// Output directory: configured value, else `$BRANCHLAB_OUT`, else
    /// `branchlab-out`, joined with `sub` when falling back.
    pub fn out_dir(&self, sub: &str) -> PathBuf {
        match &self.out {
            Some(p) => p.clone(),
            None => std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUT), PathBuf::from).join(sub),
        }
    }

    pub fn require<T: Clone>(value: &Option<T>, key: &'static str) -> Result<T, ConfigError> {
        value.clone().ok_or(ConfigError::Missing(key))
    }
}

/// Parses `0,1,5` and ranges such as `0-4`.
pub fn parse_list(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| format!("bad range start in `{part}`"))?;
                let b: u64 = b.trim().parse().map_err(|_| format!("bad range end in `{part}`"))?;
                if a > b {
                    return Err(format!("empty range `{part}`"));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| format!("bad integer `{part}`"))?),
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}
