//! Open-node bookkeeping and best-bound node selection with child plunging.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use super::stats::SearchStats;

#[derive(Clone, Copy, Debug, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Lowest bound first, then deeper, then lower id.
type Key = (OrdF64, Reverse<u64>, usize);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpenEntry {
    pub lower_bound: f64,
    pub depth: u64,
    pub parent: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct OpenList {
    order: BTreeSet<Key>,
    entries: BTreeMap<usize, OpenEntry>,
    children: BTreeMap<usize, Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Selection {
    pub id: usize,
    /// The node is a child of the previously processed node.
    pub plunged: bool,
}

impl OpenList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn push(&mut self, id: usize, entry: OpenEntry) {
        self.order.insert((OrdF64(entry.lower_bound), Reverse(entry.depth), id));
        if let Some(p) = entry.parent {
            self.children.entry(p).or_default().push(id);
        }
        self.entries.insert(id, entry);
    }

    pub fn remove(&mut self, id: usize) -> Option<OpenEntry> {
        let e = self.entries.remove(&id)?;
        self.order.remove(&(OrdF64(e.lower_bound), Reverse(e.depth), id));
        if let Some(p) = e.parent {
            if let Some(list) = self.children.get_mut(&p) {
                list.retain(|&c| c != id);
                if list.is_empty() {
                    self.children.remove(&p);
                }
            }
        }
        Some(e)
    }

    pub fn min_lower_bound(&self) -> Option<f64> {
        self.order.first().map(|k| k.0 .0)
    }

    pub fn best(&self) -> Option<usize> {
        self.order.first().map(|k| k.2)
    }

    /// Lower bounds and depths of all open nodes, in selection order.
    pub fn snapshot(&self) -> (Vec<f64>, Vec<f64>) {
        self.order.iter().map(|k| (k.0 .0, k.1 .0 as f64)).unzip()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &OpenEntry)> {
        self.entries.iter().map(|(&id, e)| (id, e))
    }

    /// Removes every open node whose bound reaches `bound − tol`.
    pub fn prune_at_or_above(&mut self, bound: f64, tol: f64) -> Vec<usize> {
        let doomed: Vec<usize> = self
            .order
            .iter()
            .rev()
            .take_while(|k| k.0 .0 >= bound - tol)
            .map(|k| k.2)
            .collect();
        for &id in &doomed {
            self.remove(id);
        }
        doomed
    }

    /// Picks the next node: an open child of `last` if any (best bound, then
    /// lower id), otherwise the global best. Updates plunge depth and the
    /// backtrack counter. Does not remove the node.
    pub fn select_next(&self, last: Option<usize>, stats: &mut SearchStats) -> Option<Selection> {
        let child = last.and_then(|l| self.children.get(&l)).and_then(|kids| {
            kids.iter()
                .filter_map(|&id| self.entries.get(&id).map(|e| (OrdF64(e.lower_bound), id)))
                .min()
                .map(|(_, id)| id)
        });
        let sel = match child {
            Some(id) => {
                stats.plunge_depth += 1;
                Selection { id, plunged: true }
            }
            None => {
                let id = self.best()?;
                if last.is_some() {
                    stats.backtracks += 1;
                }
                stats.plunge_depth = 0;
                Selection { id, plunged: false }
            }
        };
        Some(sel)
    }
}
