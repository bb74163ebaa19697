//! Dataset shards and the collection manifest.
//!
//! A shard holds the data points of one collection run in either of two
//! encodings:
//!
//! - JSON lines (`.jsonl`): one serialized [`DataPoint`] per line, exact.
//! - packed binary (`.bin`), all integers and floats little-endian:
//!
//! ```text
//! file    := magic "BLSHARD1" | u32 record_count | record*
//! record  := u32 payload_len | payload
//! payload := u32 n_candidates | u32 label | u64 seed | u64 k | u64 step
//!            | u32 name_len | name_len bytes (UTF-8 instance name)
//!            | 61 × f32 tree | n_candidates × u32 candidate ids
//!            | n_candidates × 25 × f32 (one 25-vector per candidate)
//! ```
//!
//! The binary encoding stores features as `f32`, so reading it back rounds
//! every value to single precision.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use branchlab_core::dataset::{DataPoint, Provenance, SplitName};
use branchlab_core::features::{CandidateMatrix, TreeState, CANDIDATE_DIM, TREE_DIM};
use branchlab_core::milp::Split;
use serde::{Deserialize, Serialize};

use crate::io::{atomic_write, read_json, sha256_hex, write_json, IoError};

pub const MAGIC: &[u8; 8] = b"BLSHARD1";

#[derive(Debug, thiserror::Error)]
pub enum ShardError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{}, line {line}: {source}", .path.display())]
    Json { path: PathBuf, line: usize, source: serde_json::Error },
    #[error("{}: malformed binary shard: {detail}", .path.display())]
    Binary { path: PathBuf, detail: String },
    #[error("{}: checksum {found} does not match manifest {expected}", .path.display())]
    Checksum { path: PathBuf, expected: String, found: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShardFormat {
    Jsonl,
    Bin,
}

impl ShardFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ShardFormat::Jsonl => "jsonl",
            ShardFormat::Bin => "bin",
        }
    }
}

pub fn encode_jsonl(points: &[DataPoint]) -> Vec<u8> {
    let mut out = Vec::new();
    for p in points {
        serde_json::to_writer(&mut out, p).expect("data points serialize");
        out.push(b'\n');
    }
    out
}

pub fn decode_jsonl(path: &Path, bytes: &[u8]) -> Result<Vec<DataPoint>, ShardError> {
    let text = String::from_utf8_lossy(bytes);
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| ShardError::Json { path: path.to_path_buf(), line: i + 1, source })
        })
        .collect()
}

pub fn encode_bin(points: &[DataPoint]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + points.len() * 512);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
    for p in points {
        let mut rec = Vec::new();
        let n = p.candidates.len();
        rec.extend_from_slice(&(n as u32).to_le_bytes());
        rec.extend_from_slice(&(p.label as u32).to_le_bytes());
        rec.extend_from_slice(&p.provenance.seed.to_le_bytes());
        rec.extend_from_slice(&p.provenance.k.to_le_bytes());
        rec.extend_from_slice(&p.provenance.step.to_le_bytes());
        let name = p.provenance.instance.as_bytes();
        rec.extend_from_slice(&(name.len() as u32).to_le_bytes());
        rec.extend_from_slice(name);
        for &v in &p.tree.values {
            rec.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for &j in &p.candidates.candidates {
            rec.extend_from_slice(&(j as u32).to_le_bytes());
        }
        for col in &p.candidates.columns {
            for &v in col {
                rec.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&(rec.len() as u32).to_le_bytes());
        out.extend_from_slice(&rec);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            format!("needed {n} bytes at offset {}, file has {}", self.pos, self.bytes.len())
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f64, String> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()) as f64)
    }
}

fn decode_bin_inner(bytes: &[u8]) -> Result<Vec<DataPoint>, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic".into());
    }
    let count = r.u32()? as usize;
    let mut points = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let start = r.pos;
        let n = r.u32()? as usize;
        let label = r.u32()? as usize;
        let seed = r.u64()?;
        let k = r.u64()?;
        let step = r.u64()?;
        let name_len = r.u32()? as usize;
        let instance = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|e| e.to_string())?;
        let tree = (0..TREE_DIM).map(|_| r.f32()).collect::<Result<Vec<_>, _>>()?;
        let candidates = (0..n).map(|_| r.u32().map(|j| j as usize)).collect::<Result<Vec<_>, _>>()?;
        let mut columns = Vec::with_capacity(n);
        for _ in 0..n {
            let mut col = [0.0; CANDIDATE_DIM];
            for v in col.iter_mut() {
                *v = r.f32()?;
            }
            columns.push(col);
        }
        if r.pos - start != len {
            return Err(format!("record length {len} disagrees with contents ({})", r.pos - start));
        }
        points.push(DataPoint {
            tree: TreeState { values: tree, step },
            candidates: CandidateMatrix { columns, candidates, step },
            label,
            provenance: Provenance { instance, seed, k, step },
        });
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(points)
}

pub fn decode_bin(path: &Path, bytes: &[u8]) -> Result<Vec<DataPoint>, ShardError> {
    decode_bin_inner(bytes).map_err(|detail| ShardError::Binary { path: path.to_path_buf(), detail })
}

/// Why a shard holds fewer points than a complete run would give.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShardFlag {
    /// The run stopped at the time or node limit.
    Partial,
    /// The random prefix used up every branching of the tree.
    PrefixExhausted,
    /// The run made no branching at all.
    Empty,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShardEntry {
    pub split: SplitName,
    pub instance: String,
    /// Split tag of the instance itself, for leakage checks.
    pub instance_split: Split,
    pub seed: u64,
    pub k: u64,
    pub format: ShardFormat,
    /// Relative to the manifest directory.
    pub path: PathBuf,
    pub points: usize,
    pub sha256: String,
    #[serde(default)]
    pub flags: Vec<ShardFlag>,
    pub nodes: u64,
    pub status: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub feature_version: String,
    pub shards: Vec<ShardEntry>,
}

impl Manifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn new() -> Self {
        Manifest { feature_version: branchlab_core::FEATURE_VERSION.to_string(), shards: Vec::new() }
    }

    pub fn load(dir: &Path) -> Result<Self, IoError> {
        read_json(&dir.join(Self::FILE))
    }

    /// Loads the manifest in `dir`, or an empty one when absent.
    pub fn load_or_new(dir: &Path) -> Result<Self, IoError> {
        if dir.join(Self::FILE).exists() {
            Self::load(dir)
        } else {
            Ok(Self::new())
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), IoError> {
        write_json(&dir.join(Self::FILE), self)
    }

    /// Adds entries, replacing any with the same split, source and format.
    pub fn merge(&mut self, entries: impl IntoIterator<Item = ShardEntry>) {
        for e in entries {
            self.shards.retain(|s| {
                !(s.split == e.split && s.instance == e.instance && s.seed == e.seed && s.k == e.k && s.format == e.format)
            });
            self.shards.push(e);
        }
        self.shards.sort_by(|a, b| {
            (a.split, &a.instance, a.seed, a.k, a.format as u8).cmp(&(b.split, &b.instance, b.seed, b.k, b.format as u8))
        });
    }

    /// Point counts per split.
    pub fn counts(&self) -> BTreeMap<SplitName, usize> {
        let mut out = BTreeMap::new();
        for s in self.shards.iter().filter(|s| s.format == ShardFormat::Jsonl) {
            *out.entry(s.split).or_insert(0) += s.points;
        }
        out
    }
}

/// Writes a shard atomically and returns its checksum.
pub fn write_shard(path: &Path, format: ShardFormat, points: &[DataPoint]) -> Result<String, IoError> {
    let bytes = match format {
        ShardFormat::Jsonl => encode_jsonl(points),
        ShardFormat::Bin => encode_bin(points),
    };
    atomic_write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

/// Reads a shard, verifying the manifest checksum.
pub fn read_shard(dir: &Path, entry: &ShardEntry) -> Result<Vec<DataPoint>, ShardError> {
    let path = dir.join(&entry.path);
    let bytes = std::fs::read(&path).map_err(crate::io::fs_err(&path))?;
    let found = sha256_hex(&bytes);
    if found != entry.sha256 {
        return Err(ShardError::Checksum { path, expected: entry.sha256.clone(), found });
    }
    match entry.format {
        ShardFormat::Jsonl => decode_jsonl(&path, &bytes),
        ShardFormat::Bin => decode_bin(&path, &bytes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(n: usize, seed: u64) -> DataPoint {
        let mut col = [0.25; CANDIDATE_DIM];
        col[0] = 0.5;
        DataPoint {
            tree: TreeState { values: (0..TREE_DIM).map(|i| i as f64 / 8.0).collect(), step: 3 },
            candidates: CandidateMatrix { columns: vec![col; n], candidates: (0..n).map(|i| 2 * i).collect(), step: 3 },
            label: n - 1,
            provenance: Provenance { instance: "inst-a".into(), seed, k: 5, step: 3 },
        }
    }

    #[test]
    fn binary_round_trip_on_f32_values() {
        let pts = vec![point(3, 1), point(1, 2)];
        let bytes = encode_bin(&pts);
        assert_eq!(decode_bin(Path::new("x"), &bytes).unwrap(), pts);
    }

    #[test]
    fn binary_rejects_truncation() {
        let bytes = encode_bin(&[point(2, 0)]);
        assert!(decode_bin(Path::new("x"), &bytes[..bytes.len() - 3]).is_err());
        assert!(decode_bin(Path::new("x"), b"NOTSHARD\0\0\0\0").is_err());
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let mut p = point(2, 0);
        p.tree.values[0] = 0.1 + 0.2;
        let pts = vec![p];
        assert_eq!(decode_jsonl(Path::new("x"), &encode_jsonl(&pts)).unwrap(), pts);
    }

    #[test]
    fn checksum_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![point(2, 0)];
        let sha = write_shard(&dir.path().join("a.jsonl"), ShardFormat::Jsonl, &pts).unwrap();
        let mut entry = ShardEntry {
            split: SplitName::Train,
            instance: "inst-a".into(),
            instance_split: Split::Train,
            seed: 0,
            k: 5,
            format: ShardFormat::Jsonl,
            path: "a.jsonl".into(),
            points: 1,
            sha256: sha,
            flags: vec![],
            nodes: 1,
            status: "optimal".into(),
        };
        assert_eq!(read_shard(dir.path(), &entry).unwrap(), pts);
        entry.sha256 = "00".into();
        assert!(matches!(read_shard(dir.path(), &entry), Err(ShardError::Checksum { .. })));
    }
}
