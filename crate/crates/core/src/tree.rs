//! Least-squares regression trees (CART) on presorted dense features.
//!
//! Trees grow best-first: the open leaf whose best split reduces the squared
//! error the most is split next, until `max_leaves` is reached or no leaf has
//! an admissible split. Split search is exact over all distinct feature
//! values. Ties go to the lowest feature index, then the lowest threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Deepest tree the nested model format can hold.
pub const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_depth: 6, max_leaves: 16, min_samples_leaf: 10 }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_leaves == 0 {
            return Err(Error::config("max_leaves must be at least 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::config("min_samples_leaf must be at least 1"));
        }
        if self.max_depth > MAX_DEPTH {
            return Err(Error::config(format!("max_depth must not exceed {MAX_DEPTH}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A binary regression tree; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        Self { nodes: vec![Node::Leaf { value }] }
    }

    /// Build from a node table, checking child links and leaf values.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Format("tree without nodes".into()));
        }
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                Node::Leaf { value } if !value.is_finite() => return Err(Error::NonFinite("leaf value")),
                Node::Split { left, right, threshold, .. } => {
                    if left <= i || right <= i || left >= nodes.len() || right >= nodes.len() {
                        return Err(Error::Format(format!("node {i} has invalid children")));
                    }
                    if threshold.is_nan() {
                        return Err(Error::NonFinite("split threshold"));
                    }
                }
                _ => {}
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Same tree with nodes renumbered in pre-order (node, left subtree,
    /// right subtree), the layout the model format reads back.
    pub fn into_preorder(self) -> Self {
        fn visit(src: &[Node], i: usize, out: &mut Vec<Node>) -> usize {
            let id = out.len();
            match src[i] {
                Node::Leaf { value } => out.push(Node::Leaf { value }),
                Node::Split { feature, threshold, left, right } => {
                    out.push(Node::Leaf { value: 0.0 });
                    let l = visit(src, left, out);
                    let r = visit(src, right, out);
                    out[id] = Node::Split { feature, threshold, left: l, right: r };
                }
            }
            id
        }
        let mut out = Vec::with_capacity(self.nodes.len());
        visit(&self.nodes, 0, &mut out);
        Self { nodes: out }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    idx = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Largest feature index used by a split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

/// Borrowed row-major feature matrix.
#[derive(Debug, Clone, Copy)]
pub struct FeatureMatrix<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
}

impl<'a> FeatureMatrix<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Self { data, rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &'a [f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    row: u32,
    value: f64,
}

/// Rows sorted by each feature's value; reused across boosting rounds.
#[derive(Debug, Clone)]
pub struct Presorted {
    order: Vec<Vec<Entry>>,
}

impl Presorted {
    pub fn new(x: &FeatureMatrix<'_>) -> Self {
        let order = (0..x.cols())
            .into_par_iter()
            .map(|c| {
                let mut idx: Vec<Entry> = (0..x.rows()).map(|r| Entry { row: r as u32, value: x.get(r, c) }).collect();
                idx.sort_by(|a, b| a.value.total_cmp(&b.value));
                idx
            })
            .collect();
        Self { order }
    }
}

#[derive(Debug, Clone, Copy)]
struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct OpenLeaf {
    node: usize,
    depth: usize,
    /// Per feature, the leaf's rows in ascending feature order.
    sorted: Vec<Vec<Entry>>,
    sum: f64,
    count: usize,
    best: Option<Split>,
}

/// Fit a tree to `targets` (one per row).
pub fn fit_tree(x: &FeatureMatrix<'_>, targets: &[f64], cfg: &TreeConfig) -> Result<RegressionTree> {
    fit_tree_presorted(x, &Presorted::new(x), targets, None, cfg)
}

/// Fit using a precomputed sort order, optionally restricted to the rows
/// where `mask` is true.
pub fn fit_tree_presorted(
    x: &FeatureMatrix<'_>,
    presorted: &Presorted,
    targets: &[f64],
    mask: Option<&[bool]>,
    cfg: &TreeConfig,
) -> Result<RegressionTree> {
    cfg.validate()?;
    if targets.len() != x.rows() {
        return Err(Error::DimensionMismatch { expected: x.rows(), found: targets.len() });
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("tree targets"));
    }
    let sorted: Vec<Vec<Entry>> = match mask {
        Some(mask) => {
            presorted.order.iter().map(|o| o.iter().copied().filter(|e| mask[e.row as usize]).collect()).collect()
        }
        None => presorted.order.clone(),
    };
    let rows: Vec<u32> = match mask {
        Some(mask) => (0..x.rows() as u32).filter(|&r| mask[r as usize]).collect(),
        None => (0..x.rows() as u32).collect(),
    };
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = rows.iter().map(|&r| targets[r as usize]).sum();
    let count = rows.len();
    if x.cols() == 0 {
        let first = targets[rows[0] as usize];
        let value = if rows.iter().all(|&r| targets[r as usize] == first) { first } else { sum / count as f64 };
        return Ok(RegressionTree { nodes: vec![Node::Leaf { value }] });
    }

    let mut nodes = vec![Node::Leaf { value: leaf_value(&sorted[0], targets, sum) }];
    let mut root = OpenLeaf { node: 0, depth: 0, sorted, sum, count, best: None };
    root.best = best_split(x, targets, &root, cfg);
    let mut open = vec![root];
    let mut leaves = 1;
    let mut goes_left = vec![false; x.rows()];

    while leaves < cfg.max_leaves {
        // Highest gain; on ties the earliest-created node.
        let mut pick: Option<usize> = None;
        for (i, leaf) in open.iter().enumerate() {
            if let Some(s) = leaf.best {
                if pick.is_none_or(|p| s.gain > open[p].best.unwrap().gain) {
                    pick = Some(i);
                }
            }
        }
        let Some(pick) = pick else { break };
        let leaf = open.swap_remove(pick);
        let split = leaf.best.unwrap();

        for e in &leaf.sorted[split.feature] {
            goes_left[e.row as usize] = e.value <= split.threshold;
        }
        let (mut l_sorted, mut r_sorted) = (Vec::with_capacity(x.cols()), Vec::with_capacity(x.cols()));
        for list in &leaf.sorted {
            let (l, r): (Vec<Entry>, Vec<Entry>) = list.iter().partition(|e| goes_left[e.row as usize]);
            l_sorted.push(l);
            r_sorted.push(r);
        }
        let l_sum: f64 = l_sorted[0].iter().map(|e| targets[e.row as usize]).sum();
        let r_sum: f64 = r_sorted[0].iter().map(|e| targets[e.row as usize]).sum();
        let (l_count, r_count) = (l_sorted[0].len(), r_sorted[0].len());

        let left_id = nodes.len();
        nodes.push(Node::Leaf { value: leaf_value(&l_sorted[0], targets, l_sum) });
        nodes.push(Node::Leaf { value: leaf_value(&r_sorted[0], targets, r_sum) });
        nodes[leaf.node] =
            Node::Split { feature: split.feature, threshold: split.threshold, left: left_id, right: left_id + 1 };
        leaves += 1;

        for (node, sorted, sum, count) in [(left_id, l_sorted, l_sum, l_count), (left_id + 1, r_sorted, r_sum, r_count)]
        {
            let mut child = OpenLeaf { node, depth: leaf.depth + 1, sorted, sum, count, best: None };
            child.best = best_split(x, targets, &child, cfg);
            open.push(child);
        }
        // Keep creation order so tie-breaking stays deterministic.
        open.sort_by_key(|l| l.node);
    }
    Ok(RegressionTree { nodes }.into_preorder())
}

/// Mean target; exact when all targets in the leaf are equal.
fn leaf_value(rows: &[Entry], targets: &[f64], sum: f64) -> f64 {
    let first = targets[rows[0].row as usize];
    if rows.iter().all(|e| targets[e.row as usize] == first) {
        first
    } else {
        sum / rows.len() as f64
    }
}

/// Leaves smaller than this (rows × features) are scanned on one thread.
const PARALLEL_WORK: usize = 1 << 16;

fn best_split(x: &FeatureMatrix<'_>, targets: &[f64], leaf: &OpenLeaf, cfg: &TreeConfig) -> Option<Split> {
    if leaf.depth >= cfg.max_depth || leaf.count < 2 * cfg.min_samples_leaf {
        return None;
    }
    let n = leaf.count;
    let parent = leaf.sum * leaf.sum / n as f64;
    let sum_sq: f64 = leaf.sorted[0].iter().map(|e| targets[e.row as usize].powi(2)).sum();
    let min_gain = 1e-12 * sum_sq;

    let scan = |feature: usize| {
        let list = &leaf.sorted[feature];
        let mut best: Option<Split> = None;
        let mut left_sum = 0.0;
        for pos in 0..n - 1 {
            left_sum += targets[list[pos].row as usize];
            let left_n = pos + 1;
            if left_n < cfg.min_samples_leaf || n - left_n < cfg.min_samples_leaf {
                continue;
            }
            let (a, b) = (list[pos].value, list[pos + 1].value);
            if a == b {
                continue;
            }
            let right_sum = leaf.sum - left_sum;
            let gain = left_sum * left_sum / left_n as f64 + right_sum * right_sum / (n - left_n) as f64 - parent;
            if gain > min_gain && best.is_none_or(|s| gain > s.gain) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid >= a && mid < b { mid } else { a };
                best = Some(Split { gain, feature, threshold });
            }
        }
        best
    };
    let per_feature: Vec<Option<Split>> = if n * x.cols() >= PARALLEL_WORK {
        (0..x.cols()).into_par_iter().map(scan).collect()
    } else {
        (0..x.cols()).map(scan).collect()
    };

    per_feature.into_iter().flatten().fold(None, |acc: Option<Split>, s| match acc {
        Some(a) if a.gain >= s.gain => Some(a),
        _ => Some(s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mse(tree: &RegressionTree, x: &FeatureMatrix<'_>, y: &[f64]) -> f64 {
        (0..x.rows()).map(|r| (tree.predict(x.row(r)) - y[r]).powi(2)).sum::<f64>() / y.len() as f64
    }

    #[test]
    fn constant_targets_give_single_leaf() {
        let data: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let x = FeatureMatrix::new(&data, 20, 2).unwrap();
        let tree = fit_tree(&x, &[0.37; 20], &TreeConfig { min_samples_leaf: 1, ..TreeConfig::default() }).unwrap();
        assert_eq!(tree.nodes(), &[Node::Leaf { value: 0.37 }]);
    }

    #[test]
    fn constant_features_give_mean_leaf() {
        let data = vec![1.0; 10];
        let x = FeatureMatrix::new(&data, 10, 1).unwrap();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let tree = fit_tree(&x, &y, &TreeConfig { min_samples_leaf: 1, ..TreeConfig::default() }).unwrap();
        assert_eq!(tree.num_leaves(), 1);
        assert_eq!(tree.predict(&[1.0]), 4.5);
    }

    #[test]
    fn perfect_stump() {
        let data = [0.1, 0.2, 0.3, 0.7, 0.8, 0.9];
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let x = FeatureMatrix::new(&data, 6, 1).unwrap();
        let cfg = TreeConfig { max_depth: 1, max_leaves: 16, min_samples_leaf: 1 };
        let tree = fit_tree(&x, &y, &cfg).unwrap();
        assert_eq!(tree.depth(), 1);
        match tree.nodes()[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert!(threshold > 0.3 && threshold < 0.7);
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(tree.predict(&[0.2]), 0.0);
        assert_eq!(tree.predict(&[0.8]), 1.0);
    }

    /// Exhaustive best stump: every feature, every cut between sorted values.
    fn oracle_stump_mse(x: &FeatureMatrix<'_>, y: &[f64], min_leaf: usize) -> f64 {
        let n = y.len();
        let mut best = {
            let m = y.iter().sum::<f64>() / n as f64;
            y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64
        };
        for f in 0..x.cols() {
            let mut vals: Vec<f64> = (0..n).map(|r| x.get(r, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for t in vals {
                let (l, r): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| x.get(i, f) <= t);
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let ml = l.iter().map(|&i| y[i]).sum::<f64>() / l.len() as f64;
                let mr = r.iter().map(|&i| y[i]).sum::<f64>() / r.len() as f64;
                let e = (l.iter().map(|&i| (y[i] - ml).powi(2)).sum::<f64>()
                    + r.iter().map(|&i| (y[i] - mr).powi(2)).sum::<f64>())
                    / n as f64;
                best = best.min(e);
            }
        }
        best
    }

    #[test]
    fn depth_two_beats_best_stump() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<f64> = (0..200 * 5).map(|_| rng.random::<f64>()).collect();
        let x = FeatureMatrix::new(&data, 200, 5).unwrap();
        let y: Vec<f64> =
            (0..200).map(|r| (x.get(r, 1) * 3.0).sin() + x.get(r, 3) + 0.1 * rng.random::<f64>()).collect();
        let cfg = TreeConfig { max_depth: 2, max_leaves: 4, min_samples_leaf: 1 };
        let tree = fit_tree(&x, &y, &cfg).unwrap();
        assert!(tree.depth() <= 2);
        let stump_cfg = TreeConfig { max_depth: 1, ..cfg.clone() };
        let stump = fit_tree(&x, &y, &stump_cfg).unwrap();
        let oracle = oracle_stump_mse(&x, &y, 1);
        assert!((mse(&stump, &x, &y) - oracle).abs() < 1e-12);
        assert!(mse(&tree, &x, &y) <= oracle + 1e-15);
    }

    #[test]
    fn respects_leaf_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<f64> = (0..300 * 3).map(|_| rng.random::<f64>()).collect();
        let x = FeatureMatrix::new(&data, 300, 3).unwrap();
        let y: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
        let cfg = TreeConfig { max_depth: 10, max_leaves: 7, min_samples_leaf: 25 };
        let tree = fit_tree(&x, &y, &cfg).unwrap();
        assert!(tree.num_leaves() <= 7);
        let mut counts = std::collections::BTreeMap::new();
        for r in 0..300 {
            *counts.entry(tree.predict(x.row(r)).to_bits()).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 25));
    }

    #[test]
    fn masked_rows_are_ignored() {
        let data = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 0.0, 100.0, 1.0];
        let x = FeatureMatrix::new(&data, 4, 1).unwrap();
        let pre = Presorted::new(&x);
        let mask = [true, true, false, true];
        let tree =
            fit_tree_presorted(&x, &pre, &y, Some(&mask), &TreeConfig { min_samples_leaf: 1, ..TreeConfig::default() })
                .unwrap();
        assert_eq!(tree.predict(&[3.0]), 1.0);
        assert_eq!(tree.predict(&[0.5]), 0.0);
    }

    #[test]
    fn from_nodes_rejects_bad_links() {
        assert!(RegressionTree::from_nodes(vec![
            Node::Split { feature: 0, threshold: 0.0, left: 1, right: 5 },
            Node::Leaf { value: 0.0 }
        ])
        .is_err());
        assert!(RegressionTree::from_nodes(vec![Node::Leaf { value: f64::NAN }]).is_err());
    }
}
