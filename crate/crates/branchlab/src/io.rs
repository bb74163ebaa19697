//! Filesystem helpers: atomic writes, checksums, instance files and suites.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use branchlab_core::milp::{InstanceError, InstanceSet, Split};
use branchlab_core::MilpInstance;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::mps::{parse_mps, write_mps, MpsError};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", .path.display())]
    Fs { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", .path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", .path.display())]
    Mps { path: PathBuf, source: MpsError },
    #[error("{}: unsupported instance extension (expected .mps or .json)", .path.display())]
    Extension { path: PathBuf },
    #[error("bad glob pattern {pattern}: {message}")]
    Glob { pattern: String, message: String },
    #[error("pattern {0} matched no files")]
    NoMatch(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

pub(crate) fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs { path: path.to_path_buf(), source }
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(fs_err(dir))?;
    }
    let file_name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let unique = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = path.with_file_name(format!(".{file_name}.{}.{unique}.tmp", std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|source| {
        let _ = fs::remove_file(&tmp);
        IoError::Fs { path: path.to_path_buf(), source }
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn read_to_string(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(fs_err(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Reads an instance from `.mps` or `.json`.
pub fn read_instance(path: &Path) -> Result<MilpInstance, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("mps") | Some("MPS") => {
            let text = read_to_string(path)?;
            parse_mps(&text).map_err(|source| IoError::Mps { path: path.to_path_buf(), source })
        }
        Some("json") => {
            let inst: MilpInstance = read_json(path)?;
            inst.validate()?;
            Ok(inst)
        }
        _ => Err(IoError::Extension { path: path.to_path_buf() }),
    }
}

pub fn write_instance(path: &Path, inst: &MilpInstance) -> Result<(), IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("mps") => atomic_write(path, write_mps(inst).as_bytes()),
        Some("json") => write_json(path, inst),
        _ => Err(IoError::Extension { path: path.to_path_buf() }),
    }
}

/// Expands paths and glob patterns, keeping order and dropping duplicates.
pub fn expand_globs(patterns: &[String]) -> Result<Vec<PathBuf>, IoError> {
    let mut out: Vec<PathBuf> = Vec::new();
    for pat in patterns {
        let paths = glob::glob(pat).map_err(|e| IoError::Glob { pattern: pat.clone(), message: e.to_string() })?;
        let mut matched: Vec<PathBuf> = paths.filter_map(Result::ok).collect();
        if matched.is_empty() {
            // a plain path that does not exist should surface as a read error
            if !pat.contains(['*', '?', '[']) {
                matched.push(PathBuf::from(pat));
            } else {
                return Err(IoError::NoMatch(pat.clone()));
            }
        }
        matched.sort();
        for p in matched {
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// One entry of a suite index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub name: String,
    pub split: Split,
    /// Relative to the index file.
    pub path: PathBuf,
}

/// `suite.json`: the instance files of a benchmark and their split tags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteIndex {
    pub instances: Vec<SuiteEntry>,
}

/// Writes every instance as JSON next to a `suite.json` index.
pub fn write_suite(dir: &Path, set: &InstanceSet, format: &str) -> Result<PathBuf, IoError> {
    let mut index = SuiteIndex::default();
    for (inst, split) in &set.entries {
        let rel = PathBuf::from(format!("{}.{format}", inst.name));
        write_instance(&dir.join(&rel), inst)?;
        index.instances.push(SuiteEntry { name: inst.name.clone(), split: *split, path: rel });
    }
    let path = dir.join("suite.json");
    write_json(&path, &index)?;
    Ok(path)
}

pub fn read_suite(index_path: &Path) -> Result<InstanceSet, IoError> {
    let index: SuiteIndex = read_json(index_path)?;
    let base = index_path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::with_capacity(index.instances.len());
    for e in index.instances {
        let mut inst = read_instance(&base.join(&e.path))?;
        inst.name = e.name;
        entries.push((inst, e.split));
    }
    Ok(InstanceSet::new(entries)?)
}
