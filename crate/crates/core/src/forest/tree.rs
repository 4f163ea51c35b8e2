// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node index of a leaf inside its tree.
pub type LeafId = usize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf,
}

/// Binary CART tree stored as a node arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    n_features: usize,
    nodes: Vec<Node>,
}

pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub max_features: usize,
    pub n_classes: usize,
}

impl DecisionTree {
    /// A depth-0 tree: every query lands in leaf 0.
    pub fn single_leaf(n_features: usize) -> Self {
        Self { n_features, nodes: vec![Node::Leaf] }
    }

    /// Build from an explicit node arena. Children must point forward and
    /// every node except the root must have exactly one parent.
    pub fn from_nodes(n_features: usize, nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Empty("tree nodes"));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            if let Node::Split { feature, left, right, threshold } = *n {
                if feature >= n_features || !threshold.is_finite() {
                    return Err(Error::InvalidConfig(format!("node {i}: bad feature or threshold")));
                }
                for child in [left, right] {
                    if child <= i || child >= nodes.len() {
                        return Err(Error::InvalidConfig(format!("node {i}: child {child} out of order")));
                    }
                    parents[child] += 1;
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(Error::InvalidConfig("node arena is not a tree".into()));
        }
        Ok(Self { n_features, nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf)).count()
    }

    /// Longest root-to-leaf path, in splits.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match self.nodes[i] {
                Node::Leaf => best = best.max(d),
                Node::Split { left, right, .. } => {
                    stack.push((left, d + 1));
                    stack.push((right, d + 1));
                }
            }
        }
        best
    }

    /// Descend by thresholds: `x[f] < threshold` goes left, otherwise right.
    pub fn leaf_of(&self, x: &[f64]) -> Result<LeafId> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.len() });
        }
        Ok(self.leaf_index(x))
    }

    pub(crate) fn leaf_index(&self, x: &[f64]) -> LeafId {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf => return i,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] < threshold { left } else { right };
                }
            }
        }
    }

    /// Grow a Gini tree on the rows selected by `rows` (may repeat, e.g. a bootstrap).
    pub(crate) fn fit<R: Rng>(
        xs: &[&[f64]],
        ys: &[usize],
        rows: Vec<usize>,
        params: &TreeParams,
        rng: &mut R,
    ) -> Self {
        let d = xs.first().map_or(0, |x| x.len());
        let mut nodes = vec![Node::Leaf];
        let mut stack = vec![(0usize, rows, 0usize)];
        let mut features: Vec<usize> = (0..d).collect();
        while let Some((node, rows, depth)) = stack.pop() {
            if depth >= params.max_depth || rows.len() < 2 * params.min_leaf || is_pure(ys, &rows) {
                continue;
            }
            features.shuffle(rng);
            let mut best: Option<(f64, usize, f64)> = None;
            for (tried, &f) in features.iter().enumerate() {
                // Past the subsample quota, keep drawing only until some split is valid.
                if tried >= params.max_features && best.is_some() {
                    break;
                }
                if let Some((score, thr)) = best_split(xs, ys, &rows, f, params) {
                    if best.is_none_or(|(s, _, _)| score > s) {
                        best = Some((score, f, thr));
                    }
                }
            }
            let Some((_, feature, threshold)) = best else { continue };
            let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| xs[i][feature] < threshold);
            let left = nodes.len();
            nodes.push(Node::Leaf);
            nodes.push(Node::Leaf);
            nodes[node] = Node::Split { feature, threshold, left, right: left + 1 };
            stack.push((left + 1, r, depth + 1));
            stack.push((left, l, depth + 1));
        }
        Self { n_features: d, nodes }
    }
}

fn is_pure(ys: &[usize], rows: &[usize]) -> bool {
    rows.iter().all(|&i| ys[i] == ys[rows[0]])
}

/// Best midpoint threshold on one feature, scored by `sum_k nl_k^2 / nl + sum_k nr_k^2 / nr`
/// (larger means lower weighted Gini impurity).
fn best_split(xs: &[&[f64]], ys: &[usize], rows: &[usize], f: usize, p: &TreeParams) -> Option<(f64, f64)> {
    let mut vals: Vec<(f64, usize)> = rows.iter().map(|&i| (xs[i][f], ys[i])).collect();
    vals.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let n = vals.len();
    let mut right = vec![0usize; p.n_classes];
    for &(_, y) in &vals {
        right[y] += 1;
    }
    let mut left = vec![0usize; p.n_classes];
    let sq = |c: &[usize]| c.iter().map(|&k| (k * k) as f64).sum::<f64>();
    let mut best: Option<(f64, f64)> = None;
    for i in 0..n - 1 {
        let y = vals[i].1;
        left[y] += 1;
        right[y] -= 1;
        let nl = i + 1;
        let nr = n - nl;
        if vals[i].0 >= vals[i + 1].0 || nl < p.min_leaf || nr < p.min_leaf {
            continue;
        }
        let score = sq(&left) / nl as f64 + sq(&right) / nr as f64;
        if best.is_none_or(|(s, _)| score > s) {
            let (a, b) = (vals[i].0, vals[i + 1].0);
            let mut thr = a + (b - a) / 2.0;
            if thr <= a {
                thr = b;
            }
            best = Some((score, thr));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stump() -> DecisionTree {
        DecisionTree::from_nodes(
            1,
            vec![Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 }, Node::Leaf, Node::Leaf],
        )
        .unwrap()
    }

    #[test]
    fn single_leaf_routes_everything() {
        let t = DecisionTree::single_leaf(3);
        assert_eq!(t.leaf_of(&[1.0, -4.0, 9.0]).unwrap(), 0);
        assert_eq!(t.depth(), 0);
    }

    #[test]
    fn stump_descent() {
        let t = stump();
        assert_eq!(t.leaf_of(&[0.2]).unwrap(), 1);
        assert_eq!(t.leaf_of(&[0.5]).unwrap(), 2);
        assert!(matches!(t.leaf_of(&[0.2, 0.1]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn malformed_arenas_are_rejected() {
        let cyc = vec![Node::Split { feature: 0, threshold: 0.5, left: 0, right: 1 }, Node::Leaf];
        assert!(DecisionTree::from_nodes(1, cyc).is_err());
        let shared = vec![
            Node::Split { feature: 0, threshold: 0.5, left: 1, right: 1 },
            Node::Leaf,
        ];
        assert!(DecisionTree::from_nodes(1, shared).is_err());
    }

    #[test]
    fn fit_separates_two_blobs_and_respects_depth() {
        let pts: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let xs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let ys: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        let params = TreeParams { max_depth: 3, min_leaf: 1, max_features: 2, n_classes: 2 };
        let tree = DecisionTree::fit(&xs, &ys, (0..40).collect(), &params, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(tree.depth() <= 3);
        for (x, y) in xs.iter().zip(&ys) {
            let leaf = tree.leaf_of(x).unwrap();
            let mates: Vec<usize> = (0..40).filter(|&j| tree.leaf_of(xs[j]).unwrap() == leaf).collect();
            assert!(mates.iter().all(|&j| ys[j] == *y));
        }
    }

    #[test]
    fn depth_cap_zero_is_a_leaf() {
        let pts = [[0.0], [1.0]];
        let xs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let params = TreeParams { max_depth: 0, min_leaf: 1, max_features: 1, n_classes: 2 };
        let tree = DecisionTree::fit(&xs, &[0, 1], vec![0, 1], &params, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(tree.n_leaves(), 1);
    }

    #[test]
    fn adjacent_floats_split_correctly() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let pts = [[a], [b]];
        let xs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let params = TreeParams { max_depth: 5, min_leaf: 1, max_features: 1, n_classes: 2 };
        let tree = DecisionTree::fit(&xs, &[0, 1], vec![0, 1], &params, &mut ChaCha8Rng::seed_from_u64(0));
        assert_ne!(tree.leaf_of(&[a]).unwrap(), tree.leaf_of(&[b]).unwrap());
    }
}
