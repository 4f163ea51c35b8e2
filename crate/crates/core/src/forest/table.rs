// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::tree::LeafId;
use crate::error::{Error, Result};

/// `S[t] = |{t' != t : counts[t] > counts[t']}|` for every batch `t`.
pub fn dominance_scores(counts: &[u32]) -> Vec<u32> {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    counts.iter().map(|&c| sorted.partition_point(|&o| o < c) as u32).collect()
}

/// One non-zero cell of a leaf's row: `count` samples of batch index `batch`
/// fell into the leaf, and `score` peers hold strictly fewer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafEntry {
    pub batch: u32,
    pub count: u32,
    pub score: u32,
}

/// Counts and scores of one tree, stored sparsely: `spans[leaf]` is a range
/// into `entries`. Batches absent from a leaf have count 0 and score 0.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TreeTable {
    spans: Vec<(u32, u32)>,
    entries: Vec<LeafEntry>,
}

impl TreeTable {
    /// `routed` holds one `(leaf, batch)` pair per counted sample.
    pub(crate) fn from_routed(n_batches: usize, mut routed: Vec<(LeafId, u32)>) -> Self {
        routed.sort_unstable();
        let mut table = TreeTable::default();
        let mut i = 0;
        while i < routed.len() {
            let leaf = routed[i].0;
            let mut row: Vec<(u32, u32)> = Vec::new();
            while i < routed.len() && routed[i].0 == leaf {
                let batch = routed[i].1;
                let mut n = 0;
                while i < routed.len() && routed[i] == (leaf, batch) {
                    n += 1;
                    i += 1;
                }
                row.push((batch, n));
            }
            table.push_leaf(n_batches, leaf, &row);
        }
        table
    }

    fn push_leaf(&mut self, n_batches: usize, leaf: LeafId, row: &[(u32, u32)]) {
        if self.spans.len() <= leaf {
            self.spans.resize(leaf + 1, (0, 0));
        }
        let mut counts: Vec<u32> = row.iter().map(|&(_, n)| n).collect();
        counts.sort_unstable();
        let absent = (n_batches - row.len()) as u32;
        let start = self.entries.len() as u32;
        for &(batch, count) in row {
            let score = absent + counts.partition_point(|&o| o < count) as u32;
            self.entries.push(LeafEntry { batch, count, score });
        }
        self.spans[leaf] = (start, row.len() as u32);
    }

    pub fn leaf(&self, leaf: LeafId) -> &[LeafEntry] {
        match self.spans.get(leaf) {
            Some(&(start, len)) => &self.entries[start as usize..(start + len) as usize],
            None => &[],
        }
    }

    /// Leaves that received at least one counted sample.
    pub fn leaves(&self) -> impl Iterator<Item = LeafId> + '_ {
        self.spans.iter().enumerate().filter(|(_, s)| s.1 > 0).map(|(k, _)| k)
    }

    pub fn total_count(&self) -> u64 {
        self.entries.iter().map(|e| e.count as u64).sum()
    }
}

/// Per-tree leaf x batch count table `N` and dominance-score table `S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafBatchTable {
    n_batches: usize,
    trees: Vec<TreeTable>,
}

impl LeafBatchTable {
    pub(crate) fn new(n_batches: usize, trees: Vec<TreeTable>) -> Self {
        Self { n_batches, trees }
    }

    /// Build from dense rows: `trees[i]` lists `(leaf, counts per batch)`.
    pub fn from_counts(n_batches: usize, trees: Vec<Vec<(LeafId, Vec<u32>)>>) -> Result<Self> {
        let mut out = Vec::with_capacity(trees.len());
        for rows in trees {
            let mut table = TreeTable::default();
            let mut seen = std::collections::HashSet::new();
            for (leaf, counts) in rows {
                if counts.len() != n_batches {
                    return Err(Error::DimensionMismatch { expected: n_batches, got: counts.len() });
                }
                if !seen.insert(leaf) {
                    return Err(Error::InvalidConfig(format!("leaf {leaf} listed twice")));
                }
                let row: Vec<(u32, u32)> =
                    counts.iter().enumerate().filter(|(_, &n)| n > 0).map(|(t, &n)| (t as u32, n)).collect();
                table.push_leaf(n_batches, leaf, &row);
            }
            out.push(table);
        }
        Ok(Self { n_batches, trees: out })
    }

    pub fn n_batches(&self) -> usize {
        self.n_batches
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn tree(&self, i: usize) -> &TreeTable {
        &self.trees[i]
    }

    /// `N^tree[leaf][batch]`.
    pub fn count(&self, tree: usize, leaf: LeafId, batch: usize) -> u32 {
        self.trees[tree].leaf(leaf).iter().find(|e| e.batch as usize == batch).map_or(0, |e| e.count)
    }

    /// `S^tree[leaf][batch]`.
    pub fn score(&self, tree: usize, leaf: LeafId, batch: usize) -> u32 {
        self.trees[tree].leaf(leaf).iter().find(|e| e.batch as usize == batch).map_or(0, |e| e.score)
    }
}
