// SPDX-License-Identifier: MIT OR Apache-2.0

//! Random-forest batch index.
//!
//! A forest is grown on every training batch. Each original training sample
//! is then routed through every tree, giving per-tree leaf x batch counts
//! `N[k][t]`, and each cell gets the dominance score
//! `S[k][t] = |{t' != t : N[k][t] > N[k][t']}|`. A query is ranked against
//! the batches by summing, over trees, the scores stored at the leaf it
//! reaches: batches that crowd the query's leaves come first.

mod table;
mod tree;

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::Batch;
use crate::error::{Error, Result};

pub use table::{dominance_scores, LeafBatchTable, LeafEntry, TreeTable};
pub use tree::{DecisionTree, LeafId, Node};

/// How many features each split considers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    /// `ceil(sqrt(d))`
    Sqrt,
    All,
    Count(usize),
}

impl FeatureSubsample {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            FeatureSubsample::Sqrt => ((d as f64).sqrt().ceil() as usize).max(1),
            FeatureSubsample::All => d,
            FeatureSubsample::Count(n) => n.clamp(1, d.max(1)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_subsample: FeatureSubsample,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_estimators: 50,
            max_depth: 20,
            min_leaf: 1,
            feature_subsample: FeatureSubsample::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 || self.max_depth == 0 || self.min_leaf == 0 {
            return Err(Error::InvalidConfig("n_estimators, max_depth and min_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

/// Batches ordered from most to least similar to a query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchRanking {
    /// Batch ids, best first.
    pub order: Vec<usize>,
    /// Aggregate score of `order[i]`.
    pub aggregate_score: Vec<u64>,
}

const INDEX_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForestIndex {
    version: u32,
    n_features: usize,
    batch_ids: Vec<usize>,
    trees: Vec<DecisionTree>,
    table: LeafBatchTable,
}

/// Train the forest on all `batches` and fill the count and score tables.
///
/// Tree `i` draws from the ChaCha stream `(config.seed, i)`, so the index does
/// not depend on how many threads build it.
pub fn train_forest(batches: &[&Batch], config: &ForestConfig) -> Result<RandomForestIndex> {
    config.validate()?;
    if batches.is_empty() || batches.iter().all(|b| b.is_empty()) {
        return Err(Error::Empty("training batches"));
    }
    let batch_ids: Vec<usize> = batches.iter().map(|b| b.batch_id).collect();
    if batch_ids.iter().collect::<HashSet<_>>().len() != batch_ids.len() {
        return Err(Error::InvalidConfig("duplicate batch ids".into()));
    }

    let mut xs: Vec<&[f64]> = Vec::new();
    let mut ys: Vec<usize> = Vec::new();
    let mut owner: Vec<u32> = Vec::new();
    for (t, b) in batches.iter().enumerate() {
        for s in &b.samples {
            xs.push(&s.features);
            ys.push(s.label);
            owner.push(t as u32);
        }
    }
    let d = xs[0].len();
    if let Some(x) = xs.iter().find(|x| x.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    let n_classes = ys.iter().max().map_or(1, |m| m + 1);
    if ys.iter().all(|&y| y == ys[0]) {
        eprintln!("warning: forest training data holds a single class; every tree is one leaf");
    }

    let params = tree::TreeParams {
        max_depth: config.max_depth,
        min_leaf: config.min_leaf,
        max_features: config.feature_subsample.resolve(d),
        n_classes,
    };
    let n = xs.len();
    let n_batches = batches.len();
    let built: Vec<(DecisionTree, TreeTable)> = (0..config.n_estimators)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let rows: Vec<usize> =
                if config.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            let tree = DecisionTree::fit(&xs, &ys, rows, &params, &mut rng);
            // Count original samples, not the bootstrap draw.
            let routed = xs.iter().zip(&owner).map(|(x, &t)| (tree.leaf_index(x), t)).collect();
            let table = TreeTable::from_routed(n_batches, routed);
            (tree, table)
        })
        .collect();
    let (trees, tables): (Vec<_>, Vec<_>) = built.into_iter().unzip();
    Ok(RandomForestIndex {
        version: INDEX_VERSION,
        n_features: d,
        batch_ids,
        trees,
        table: LeafBatchTable::new(n_batches, tables),
    })
}

impl RandomForestIndex {
    /// Assemble an index from prebuilt trees and tables.
    pub fn from_parts(trees: Vec<DecisionTree>, table: LeafBatchTable, batch_ids: Vec<usize>) -> Result<Self> {
        let n_features = trees.first().ok_or(Error::Empty("trees"))?.n_features();
        if trees.iter().any(|t| t.n_features() != n_features) {
            return Err(Error::InvalidConfig("trees disagree on feature count".into()));
        }
        if table.n_trees() != trees.len() || table.n_batches() != batch_ids.len() {
            return Err(Error::InvalidConfig("table shape does not match trees and batches".into()));
        }
        if batch_ids.iter().collect::<HashSet<_>>().len() != batch_ids.len() {
            return Err(Error::InvalidConfig("duplicate batch ids".into()));
        }
        Ok(Self { version: INDEX_VERSION, n_features, batch_ids, trees, table })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn table(&self) -> &LeafBatchTable {
        &self.table
    }

    pub fn batch_ids(&self) -> &[usize] {
        &self.batch_ids
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Rank every batch for `query`: descending summed score, ties to the
    /// larger (more recent) batch id.
    pub fn rank_batches(&self, query: &[f64]) -> Result<BatchRanking> {
        if query.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: query.len() });
        }
        let mut agg = vec![0u64; self.batch_ids.len()];
        for (i, tree) in self.trees.iter().enumerate() {
            for e in self.table.tree(i).leaf(tree.leaf_index(query)) {
                agg[e.batch as usize] += e.score as u64;
            }
        }
        let mut idx: Vec<usize> = (0..agg.len()).collect();
        idx.sort_unstable_by(|&a, &b| agg[b].cmp(&agg[a]).then(self.batch_ids[b].cmp(&self.batch_ids[a])));
        Ok(BatchRanking {
            order: idx.iter().map(|&t| self.batch_ids[t]).collect(),
            aggregate_score: idx.iter().map(|&t| agg[t]).collect(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let index: Self = serde_json::from_str(s)?;
        if index.version != INDEX_VERSION {
            return Err(Error::Version { expected: INDEX_VERSION, found: index.version });
        }
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
