//! Imitation data points and the seed/prefix grids that define each split.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::{CandidateMatrix, TreeState, TREE_DIM};
use crate::milp::Split;
use crate::num::is_fractional;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub instance: String,
    pub seed: u64,
    /// Number of random branchings before collection started.
    pub k: u64,
    /// Branching step within the run.
    pub step: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub tree: TreeState,
    pub candidates: CandidateMatrix,
    /// Position of the expert's choice in the candidate list.
    pub label: usize,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("label {label} outside candidate set of size {len}")]
    LabelOutOfRange { label: usize, len: usize },
    #[error("tree state has {0} entries")]
    TreeShape(usize),
    #[error("candidate ids ({ids}) and columns ({cols}) disagree")]
    CandidateShape { ids: usize, cols: usize },
    #[error("non-finite feature value")]
    NonFinite,
    #[error("labelled candidate has integral LP value {0}")]
    IntegralLabel(f64),
    #[error("{split} split does not accept source seed {seed}, k {k}")]
    OffGrid { split: SplitName, seed: u64, k: u64 },
    #[error("instance {instance} is a {found:?} instance but feeds the {split} split")]
    Leakage { instance: String, split: SplitName, found: Split },
}

impl DataPoint {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let len = self.candidates.len();
        if self.label >= len {
            return Err(DatasetError::LabelOutOfRange { label: self.label, len });
        }
        if self.candidates.candidates.len() != len {
            return Err(DatasetError::CandidateShape { ids: self.candidates.candidates.len(), cols: len });
        }
        if self.tree.values.len() != TREE_DIM {
            return Err(DatasetError::TreeShape(self.tree.values.len()));
        }
        if !self.tree.is_finite() || !self.candidates.is_finite() {
            return Err(DatasetError::NonFinite);
        }
        // row 0 of a column is the candidate's LP value
        let x = self.candidates.columns[self.label][0];
        if !is_fractional(x) {
            return Err(DatasetError::IntegralLabel(x));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Valid, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Test => "test",
        }
    }

    /// Which instance set feeds this split.
    pub fn instance_split(self) -> Split {
        match self {
            SplitName::Train | SplitName::Valid => Split::Train,
            SplitName::Test => Split::Test,
        }
    }
}

impl core::fmt::Display for SplitName {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for SplitName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitName::Train),
            "valid" | "validation" => Ok(SplitName::Valid),
            "test" => Ok(SplitName::Test),
            _ => Err(alloc::format!("unknown split '{s}' (expected train, valid or test)")),
        }
    }
}

/// Seeds and random-prefix lengths a split draws from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitGrid {
    pub seeds: Vec<u64>,
    pub ks: Vec<u64>,
}

pub const PREFIX_GRID: [u64; 5] = [0, 1, 5, 10, 15];

impl SplitGrid {
    pub fn standard(split: SplitName) -> Self {
        match split {
            SplitName::Train => SplitGrid { seeds: alloc::vec![0, 1, 2, 3], ks: PREFIX_GRID.to_vec() },
            SplitName::Valid => SplitGrid { seeds: alloc::vec![4], ks: PREFIX_GRID.to_vec() },
            SplitName::Test => SplitGrid { seeds: alloc::vec![0, 1, 2, 3, 4], ks: alloc::vec![0] },
        }
    }

    pub fn contains(&self, seed: u64, k: u64) -> bool {
        self.seeds.contains(&seed) && self.ks.contains(&k)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.seeds.iter().flat_map(move |&s| self.ks.iter().map(move |&k| (s, k)))
    }
}

/// One collection run: an instance solved with seed `seed` after `k` random
/// branchings.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Source {
    pub instance: String,
    pub seed: u64,
    pub k: u64,
}

/// Rejects sources that fall outside the split's grid or leak instances
/// across the train/test boundary.
pub fn check_source(split: SplitName, grid: &SplitGrid, source: &Source, instance_split: Split) -> Result<(), DatasetError> {
    if instance_split != split.instance_split() {
        return Err(DatasetError::Leakage { instance: source.instance.clone(), split, found: instance_split });
    }
    if !grid.contains(source.seed, source.k) || (split == SplitName::Test && source.k != 0) {
        return Err(DatasetError::OffGrid { split, seed: source.seed, k: source.k });
    }
    Ok(())
}

/// Counts of candidate-set sizes.
pub fn histogram_candidates<'a>(points: impl IntoIterator<Item = &'a DataPoint>) -> BTreeMap<usize, u64> {
    let mut bins = BTreeMap::new();
    for p in points {
        *bins.entry(p.candidates.len()).or_insert(0) += 1;
    }
    bins
}

/// Counts of expert label positions.
pub fn histogram_labels<'a>(points: impl IntoIterator<Item = &'a DataPoint>) -> BTreeMap<usize, u64> {
    let mut bins = BTreeMap::new();
    for p in points {
        *bins.entry(p.label).or_insert(0) += 1;
    }
    bins
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::CANDIDATE_DIM;
    use alloc::vec;

    fn point(n: usize, label: usize) -> DataPoint {
        let mut col = [0.0; CANDIDATE_DIM];
        col[0] = 0.5;
        DataPoint {
            tree: TreeState { values: vec![0.0; TREE_DIM], step: 0 },
            candidates: CandidateMatrix { columns: vec![col; n], candidates: (0..n).collect(), step: 0 },
            label,
            provenance: Provenance::default(),
        }
    }

    #[test]
    fn histogram_counts_sizes() {
        let pts = [point(2, 0), point(2, 1), point(7, 3)];
        let h = histogram_candidates(&pts);
        assert_eq!(h.get(&2), Some(&2));
        assert_eq!(h.get(&7), Some(&1));
        assert!(histogram_candidates(&[]).is_empty());
    }

    #[test]
    fn histograms_are_additive() {
        let a = [point(2, 0), point(3, 1)];
        let b = [point(3, 0)];
        let merged: Vec<_> = a.iter().chain(b.iter()).cloned().collect();
        let h = histogram_candidates(&merged);
        assert_eq!(h.get(&3), Some(&2));
    }

    #[test]
    fn grids() {
        assert!(SplitGrid::standard(SplitName::Train).contains(3, 15));
        assert!(!SplitGrid::standard(SplitName::Train).contains(4, 0));
        assert_eq!(SplitGrid::standard(SplitName::Valid).pairs().count(), 5);
        assert_eq!(SplitGrid::standard(SplitName::Test).pairs().count(), 5);
    }

    #[test]
    fn test_split_rejects_prefix() {
        let src = Source { instance: "a".into(), seed: 0, k: 5 };
        let grid = SplitGrid { seeds: vec![0], ks: vec![0, 5] };
        assert!(matches!(
            check_source(SplitName::Test, &grid, &src, Split::Test),
            Err(DatasetError::OffGrid { .. })
        ));
    }

    #[test]
    fn leakage_is_an_error() {
        let src = Source { instance: "a".into(), seed: 0, k: 0 };
        let grid = SplitGrid::standard(SplitName::Train);
        assert!(matches!(
            check_source(SplitName::Train, &grid, &src, Split::Test),
            Err(DatasetError::Leakage { .. })
        ));
        assert!(check_source(SplitName::Train, &grid, &src, Split::Train).is_ok());
    }

    #[test]
    fn label_must_be_fractional() {
        let mut p = point(2, 1);
        assert!(p.validate().is_ok());
        p.candidates.columns[1][0] = 2.0;
        assert_eq!(p.validate(), Err(DatasetError::IntegralLabel(2.0)));
        p.label = 5;
        assert!(matches!(p.validate(), Err(DatasetError::LabelOutOfRange { .. })));
    }
}
