//! CART regression trees.
//!
//! Trees are grown greedily. At every node each allowed feature is scanned
//! over all midpoints between consecutive distinct sorted values and the
//! split with the largest variance reduction wins. Ties go to the lowest
//! feature index, then the lowest threshold. A sample goes left iff its
//! feature value is `<= threshold`.
//!
//! Without a leaf budget the tree is grown depth-first to `max_depth`. With
//! `max_leaf_nodes` set, growth is best-first: the frontier node whose split
//! removes the most squared error is expanded next (ties by node creation
//! order) until the budget is spent.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureVector, N_FEATURES};
use crate::error::{param, Error, Result};
use crate::seed;

/// Gini index `1 - Σ pᵢ²` of a node with class fractions `pᵢ`.
pub fn gini_index(fractions: &[f64]) -> Result<f64> {
    if fractions.is_empty() {
        return Err(param("gini_index: no class fractions"));
    }
    if fractions.iter().any(|&p| !(p >= 0.0)) {
        return Err(param("gini_index: fractions must be nonnegative"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(param(format!("gini_index: fractions sum to {total}, not 1")));
    }
    Ok(1.0 - fractions.iter().map(|p| p * p).sum::<f64>())
}

/// Population variance of `targets`, the regression impurity.
pub fn mse_impurity(targets: &[f64]) -> Result<f64> {
    if targets.is_empty() {
        return Err(param("mse_impurity: empty target list"));
    }
    Ok(mean_and_mse(targets.iter().copied()).1)
}

fn mean_and_mse(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    let sse: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, sse / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    /// `None` means unlimited.
    pub max_leaf_nodes: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: usize::MAX, max_leaf_nodes: None, min_samples_leaf: 1 }
    }
}

impl TreeParams {
    pub fn new(max_depth: usize, max_leaf_nodes: Option<usize>, min_samples_leaf: usize) -> Result<Self> {
        let p = TreeParams { max_depth, max_leaf_nodes, min_samples_leaf };
        p.validate()?;
        Ok(p)
    }

    /// Tuned single-tree settings for mean-Cp data (depth 20, 1250 leaves, 2 per leaf).
    pub fn tuned_mean_cp() -> Self {
        TreeParams { max_depth: 20, max_leaf_nodes: Some(1250), min_samples_leaf: 2 }
    }

    /// Tuned single-tree settings for fluctuating-Cp data (depth 20, 1500 leaves, 2 per leaf).
    pub fn tuned_rms_cp() -> Self {
        TreeParams { max_depth: 20, max_leaf_nodes: Some(1500), min_samples_leaf: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf < 1 {
            return Err(param("min_samples_leaf must be >= 1"));
        }
        if let Some(leaves) = self.max_leaf_nodes {
            if leaves < 2 {
                return Err(param(format!("max_leaf_nodes = {leaves}: must be >= 2")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature_index: usize,
    pub threshold: f64,
    /// Parent MSE minus the size-weighted MSE of the children.
    pub impurity_decrease: f64,
    pub left_count: usize,
    pub right_count: usize,
}

impl SplitCandidate {
    /// Reduction of the node's sum of squared errors.
    pub fn sse_reduction(&self) -> f64 {
        self.impurity_decrease * (self.left_count + self.right_count) as f64
    }
}

/// Borrowed training matrix: one feature vector and one target per row.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSet<'a> {
    pub features: &'a [FeatureVector],
    pub targets: &'a [f64],
}

impl<'a> TrainingSet<'a> {
    pub fn new(features: &'a [FeatureVector], targets: &'a [f64]) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(param(format!(
                "{} feature rows but {} targets",
                features.len(),
                targets.len()
            )));
        }
        Ok(TrainingSet { features, targets })
    }
}

/// Exhaustive split search over the rows in `indices`.
///
/// Returns `None` when no split has a strictly positive decrease while
/// leaving at least `min_samples_leaf` rows on each side.
pub fn best_split(
    set: TrainingSet<'_>,
    indices: &[usize],
    allowed_features: &[usize],
    min_samples_leaf: usize,
) -> Result<Option<SplitCandidate>> {
    if allowed_features.is_empty() {
        return Err(param("best_split: no allowed features"));
    }
    if let Some(&f) = allowed_features.iter().find(|&&f| f >= N_FEATURES) {
        return Err(param(format!("best_split: feature index {f} out of range")));
    }
    let mut features = allowed_features.to_vec();
    features.sort_unstable();
    features.dedup();
    Ok(search(set, indices, &features, min_samples_leaf.max(1)))
}

/// Relative gap below which two split scores count as tied. The same
/// partition reached through different features sums its targets in a
/// different order, so exact ties can differ in the last bits.
const TIE_TOLERANCE: f64 = 1e-12;

fn search(set: TrainingSet<'_>, indices: &[usize], features: &[usize], min_leaf: usize) -> Option<SplitCandidate> {
    let n = indices.len();
    if n < 2 * min_leaf || n < 2 {
        return None;
    }
    let first = set.targets[indices[0]];
    if indices.iter().all(|&i| set.targets[i] == first) {
        return None;
    }
    let total: f64 = indices.iter().map(|&i| set.targets[i]).sum();
    let nf = n as f64;

    let mut order = Vec::with_capacity(n);
    let mut best: Option<(f64, SplitCandidate)> = None;
    for &feature in features {
        order.clear();
        order.extend_from_slice(indices);
        order.sort_by(|&a, &b| set.features[a].get(feature).total_cmp(&set.features[b].get(feature)));
        let mut left_sum = 0.0;
        for pos in 0..n - 1 {
            left_sum += set.targets[order[pos]];
            let left = pos + 1;
            let right = n - left;
            if left < min_leaf {
                continue;
            }
            if right < min_leaf {
                break;
            }
            let lo = set.features[order[pos]].get(feature);
            let hi = set.features[order[pos + 1]].get(feature);
            if lo >= hi {
                continue;
            }
            let (nl, nr) = (left as f64, right as f64);
            let diff = left_sum / nl - (total - left_sum) / nr;
            let sse_drop = nl * nr / nf * diff * diff;
            if best.as_ref().is_none_or(|(b, _)| sse_drop > *b + TIE_TOLERANCE * b.abs()) {
                best = Some((
                    sse_drop,
                    SplitCandidate {
                        feature_index: feature,
                        threshold: midpoint(lo, hi),
                        impurity_decrease: sse_drop / nf,
                        left_count: left,
                        right_count: right,
                    },
                ));
            }
        }
    }
    best.filter(|(drop, _)| *drop > 0.0).map(|(_, c)| c)
}

/// Midpoint of two distinct values, kept strictly below `hi` so that `lo`
/// routes left and `hi` routes right.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    if mid < hi {
        mid
    } else {
        lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        n_samples: usize,
        mse: f64,
    },
}

/// A fitted tree stored as an arena of nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTree")]
pub struct RegressionTree {
    nodes: Vec<Node>,
    root: usize,
}

#[derive(Deserialize)]
struct RawTree {
    nodes: Vec<Node>,
    root: usize,
}

impl TryFrom<RawTree> for RegressionTree {
    type Error = Error;

    fn try_from(raw: RawTree) -> Result<Self> {
        RegressionTree::from_nodes(raw.nodes, raw.root)
    }
}

impl RegressionTree {
    /// Builds a tree from an arena, checking that every node is reachable
    /// from `root` exactly once and that all child links are in range.
    pub fn from_nodes(nodes: Vec<Node>, root: usize) -> Result<Self> {
        if root >= nodes.len() {
            return Err(param(format!("tree root {root} out of range ({} nodes)", nodes.len())));
        }
        let mut visited = vec![false; nodes.len()];
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            if i >= nodes.len() {
                return Err(param(format!("tree child index {i} out of range")));
            }
            if std::mem::replace(&mut visited[i], true) {
                return Err(param(format!("tree node {i} reachable more than once")));
            }
            match nodes[i] {
                Node::Internal { feature, threshold, left, right } => {
                    if feature >= N_FEATURES || !threshold.is_finite() {
                        return Err(param(format!("tree node {i}: invalid split")));
                    }
                    stack.push(right);
                    stack.push(left);
                }
                Node::Leaf { value, .. } => {
                    if !value.is_finite() {
                        return Err(param(format!("tree node {i}: non-finite leaf value")));
                    }
                }
            }
        }
        if let Some(i) = visited.iter().position(|v| !v) {
            return Err(param(format!("tree node {i} unreachable from root")));
        }
        Ok(RegressionTree { nodes, root })
    }

    /// A tree consisting of one leaf.
    pub fn constant(value: f64) -> Self {
        RegressionTree { nodes: vec![Node::Leaf { value, n_samples: 0, mse: 0.0 }], root: 0 }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Index of the leaf that `x` is routed to.
    pub fn leaf_index(&self, x: &FeatureVector) -> usize {
        let mut i = self.root;
        loop {
            match self.nodes[i] {
                Node::Internal { feature, threshold, left, right } => {
                    i = if x.get(feature) <= threshold { left } else { right };
                }
                Node::Leaf { .. } => return i,
            }
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value, .. } => value,
            Node::Internal { .. } => unreachable!("leaf_index always stops at a leaf"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Length of the longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(self.root, 0)];
        while let Some((i, d)) = stack.pop() {
            deepest = deepest.max(d);
            if let Node::Internal { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        deepest
    }

    /// `(feature, threshold)` of every internal node in pre-order.
    pub fn split_sequence(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            if let Node::Internal { feature, threshold, left, right } = self.nodes[i] {
                out.push((feature, threshold));
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }
}

pub fn predict_tree(tree: &RegressionTree, x: &FeatureVector) -> f64 {
    tree.predict(x)
}

/// Fits a tree to the whole dataset.
///
/// With `feature_subset_size = Some(k)`, each node searches only `k`
/// distinct features drawn from a stream seeded by `(rng_seed, node index)`.
pub fn fit_tree(
    ds: &Dataset,
    params: &TreeParams,
    feature_subset_size: Option<usize>,
    rng_seed: u64,
) -> Result<RegressionTree> {
    if ds.is_empty() {
        return Err(param("fit_tree: empty dataset"));
    }
    let features = ds.features();
    let targets = ds.targets();
    let set = TrainingSet::new(&features, &targets)?;
    let indices: Vec<usize> = (0..ds.len()).collect();
    fit_tree_on(set, indices, params, feature_subset_size, rng_seed)
}

/// Fits a tree to the rows `indices` of `set`. Rows may repeat.
pub fn fit_tree_on(
    set: TrainingSet<'_>,
    indices: Vec<usize>,
    params: &TreeParams,
    feature_subset_size: Option<usize>,
    rng_seed: u64,
) -> Result<RegressionTree> {
    params.validate()?;
    if indices.is_empty() {
        return Err(param("fit_tree: no training rows"));
    }
    if let Some(k) = feature_subset_size {
        if !(1..=N_FEATURES).contains(&k) {
            return Err(param(format!("feature_subset_size = {k}: must lie in [1, {N_FEATURES}]")));
        }
    }
    let mut grower = Grower { set, params, subset: feature_subset_size, seed: rng_seed, nodes: Vec::new() };
    grower.grow(indices);
    Ok(RegressionTree { nodes: grower.nodes, root: 0 })
}

struct Pending {
    node: usize,
    depth: usize,
    indices: Vec<usize>,
    split: SplitCandidate,
}

impl Pending {
    fn key(&self) -> f64 {
        self.split.sse_reduction()
    }
}

// Max-heap order: larger SSE reduction first, then smaller node index.
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().total_cmp(&other.key()).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

struct Grower<'a, 'p> {
    set: TrainingSet<'a>,
    params: &'p TreeParams,
    subset: Option<usize>,
    seed: u64,
    nodes: Vec<Node>,
}

impl Grower<'_, '_> {
    /// Appends a leaf for `indices` and returns it together with its best
    /// split, if the node may be split further.
    fn make_node(&mut self, indices: Vec<usize>, depth: usize) -> Option<Pending> {
        let node = self.nodes.len();
        let (value, mse) = mean_and_mse(indices.iter().map(|&i| self.set.targets[i]));
        self.nodes.push(Node::Leaf { value, n_samples: indices.len(), mse });
        if depth >= self.params.max_depth {
            return None;
        }
        let features = self.node_features(node);
        let split = search(self.set, &indices, &features, self.params.min_samples_leaf)?;
        Some(Pending { node, depth, indices, split })
    }

    fn node_features(&self, node: usize) -> Vec<usize> {
        match self.subset {
            Some(k) if k < N_FEATURES => {
                let mut rng = seed::rng(seed::derive_seed(self.seed, seed::TAG_NODE_FEATURES, node as u64));
                let mut all: Vec<usize> = (0..N_FEATURES).collect();
                all.shuffle(&mut rng);
                all.truncate(k);
                all.sort_unstable();
                all
            }
            _ => (0..N_FEATURES).collect(),
        }
    }

    /// Turns a pending leaf into an internal node and creates its children.
    fn expand(&mut self, p: Pending) -> [Option<Pending>; 2] {
        let SplitCandidate { feature_index: feature, threshold, .. } = p.split;
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = p
            .indices
            .into_iter()
            .partition(|&i| self.set.features[i].get(feature) <= threshold);
        let left = self.nodes.len();
        let left_pending = self.make_node(left_rows, p.depth + 1);
        let right = self.nodes.len();
        let right_pending = self.make_node(right_rows, p.depth + 1);
        self.nodes[p.node] = Node::Internal { feature, threshold, left, right };
        [left_pending, right_pending]
    }

    fn grow(&mut self, indices: Vec<usize>) {
        let Some(root) = self.make_node(indices, 0) else {
            return;
        };
        match self.params.max_leaf_nodes {
            None => {
                let mut stack = vec![root];
                while let Some(p) = stack.pop() {
                    let [l, r] = self.expand(p);
                    stack.extend(r);
                    stack.extend(l);
                }
            }
            Some(budget) => {
                let mut frontier = BinaryHeap::from([root]);
                let mut leaves = 1;
                while leaves < budget {
                    let Some(p) = frontier.pop() else { break };
                    frontier.extend(self.expand(p).into_iter().flatten());
                    leaves += 1;
                }
            }
        }
    }
}
