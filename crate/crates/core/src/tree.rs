//! CART weak learner (Gini criterion) and per-tree feature importance.
//!
//! Trees are fit on a minipatch and only ever see local column indices
//! `0..m`; mapping back to dataset columns is the caller's business.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthLimit {
    /// Grow until every leaf is pure or its rows cannot be separated.
    Saturated,
    Max(usize),
}

impl DepthLimit {
    fn allows_split_at(self, depth: usize) -> bool {
        match self {
            DepthLimit::Saturated => true,
            DepthLimit::Max(limit) => depth < limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node<T> {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf { label: Label },
}

/// Training-time bookkeeping for one node; not persisted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeStats {
    pub n_samples: usize,
    /// Gini decrease of the split at this node (zero for leaves).
    pub impurity_decrease: f64,
}

/// Equality compares structure only; training statistics are ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree<T> {
    nodes: Vec<Node<T>>,
    n_features: usize,
    #[serde(skip)]
    stats: Vec<NodeStats>,
}

impl<T: PartialEq> PartialEq for DecisionTree<T> {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.n_features == other.n_features
    }
}

/// Per-feature importance over a minipatch, normalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector {
    pub scores: Vec<f64>,
    /// Set when no feature earned any importance; `scores` is then all zero.
    pub all_zero: bool,
}

impl ImportanceVector {
    fn from_raw(mut scores: Vec<f64>) -> Self {
        let total: f64 = scores.iter().sum();
        if total > 0.0 {
            for s in scores.iter_mut() {
                *s /= total;
            }
            Self {
                scores,
                all_zero: false,
            }
        } else {
            scores.iter_mut().for_each(|s| *s = 0.0);
            Self {
                scores,
                all_zero: true,
            }
        }
    }
}

pub(crate) fn gini(n: usize, n_pos: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let a = n_pos as f64 / n as f64;
    let b = 1.0 - a;
    1.0 - a * a - b * b
}

/// Gini decrease of splitting a node of `n` rows (`n_pos` positive) into a
/// left part of `n_left` rows (`pos_left` positive) and the remainder.
pub fn gini_gain(n: usize, n_pos: usize, n_left: usize, pos_left: usize) -> f64 {
    let n_right = n - n_left;
    let pos_right = n_pos - pos_left;
    let nf = n as f64;
    gini(n, n_pos)
        - (n_left as f64 / nf) * gini(n_left, pos_left)
        - (n_right as f64 / nf) * gini(n_right, pos_right)
}

fn majority(labels: impl Iterator<Item = Label>) -> Label {
    let balance: i64 = labels.map(i64::from).sum();
    if balance >= 0 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate<T> {
    pub feature: usize,
    pub threshold: T,
    pub gain: f64,
}

/// Best (feature, threshold) over the given rows. Scans features in
/// ascending order and thresholds ascending within each, replacing the
/// incumbent only on strictly larger gain, so ties resolve to the lowest
/// feature, then the lowest threshold. `None` when every feature is
/// constant over the rows.
pub fn best_split<T: Scalar>(
    x: &[T],
    n_features: usize,
    y: &[Label],
    rows: &[usize],
) -> Option<SplitCandidate<T>> {
    let n = rows.len();
    let n_pos = rows.iter().filter(|&&i| y[i] == 1).count();
    let mut best: Option<SplitCandidate<T>> = None;
    let mut column: Vec<(T, Label)> = Vec::with_capacity(n);

    for feature in 0..n_features {
        column.clear();
        column.extend(rows.iter().map(|&i| (x[i * n_features + feature], y[i])));
        column.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));

        let mut pos_left = 0;
        for k in 0..n - 1 {
            if column[k].1 == 1 {
                pos_left += 1;
            }
            let (lo, hi) = (column[k].0, column[k + 1].0);
            if lo == hi {
                continue;
            }
            let gain = gini_gain(n, n_pos, k + 1, pos_left);
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate {
                    feature,
                    threshold: T::split_point(lo, hi),
                    gain,
                });
            }
        }
    }
    best
}

/// Fits a CART tree on a row-major `n x n_features` minipatch.
///
/// A node becomes a leaf when it is pure, sits at the depth limit, or has no
/// separable feature. Otherwise it takes the best Gini split even when that
/// split's gain is zero, which lets saturated trees resolve patterns such as
/// XOR where no single split helps. Leaf labels are the majority class with
/// ties going to `+1`.
pub fn fit_tree<T: Scalar>(
    x: &[T],
    n_features: usize,
    y: &[Label],
    depth: DepthLimit,
) -> Result<DecisionTree<T>> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("cannot fit a tree on an empty minipatch".into()));
    }
    if n_features == 0 || x.len() != y.len() * n_features {
        return Err(Error::InvalidArgument(format!(
            "minipatch holds {} values for {} rows of width {}",
            x.len(),
            y.len(),
            n_features
        )));
    }
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos / n_features,
            col: pos % n_features,
        });
    }

    let mut nodes: Vec<Node<T>> = Vec::new();
    let mut stats: Vec<NodeStats> = Vec::new();
    // (node id, rows, depth)
    let mut pending: Vec<(usize, Vec<usize>, usize)> = Vec::new();

    nodes.push(Node::Leaf { label: 1 });
    stats.push(NodeStats {
        n_samples: y.len(),
        impurity_decrease: 0.0,
    });
    pending.push((0, (0..y.len()).collect(), 0));

    while let Some((id, rows, level)) = pending.pop() {
        let label = majority(rows.iter().map(|&i| y[i]));
        let pure = rows.iter().all(|&i| y[i] == y[rows[0]]);
        let split = if pure || !depth.allows_split_at(level) {
            None
        } else {
            best_split(x, n_features, y, &rows)
        };
        let Some(split) = split else {
            nodes[id] = Node::Leaf { label };
            continue;
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| x[i * n_features + split.feature] <= split.threshold);
        let left = nodes.len();
        let right = left + 1;
        for part in [&left_rows, &right_rows] {
            nodes.push(Node::Leaf { label: 1 });
            stats.push(NodeStats {
                n_samples: part.len(),
                impurity_decrease: 0.0,
            });
        }
        nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        stats[id].impurity_decrease = split.gain;
        pending.push((right, right_rows, level + 1));
        pending.push((left, left_rows, level + 1));
    }

    Ok(DecisionTree {
        nodes,
        n_features,
        stats,
    })
}

impl<T: Scalar> DecisionTree<T> {
    /// A tree that always answers `label`.
    pub fn leaf(label: Label, n_features: usize) -> Self {
        Self {
            nodes: vec![Node::Leaf { label }],
            n_features,
            stats: Vec::new(),
        }
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn stats(&self) -> &[NodeStats] {
        &self.stats
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, d)) = stack.pop() {
            match self.nodes[id] {
                Node::Split { left, right, .. } => {
                    stack.push((left, d + 1));
                    stack.push((right, d + 1));
                }
                Node::Leaf { .. } => deepest = deepest.max(d),
            }
        }
        deepest
    }

    fn route(&self, value_of: impl Fn(usize) -> T) -> Label {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if value_of(feature) <= threshold { left } else { right },
                Node::Leaf { label } => return label,
            }
        }
    }

    /// Predicts a minipatch-width row.
    pub fn predict(&self, row: &[T]) -> Label {
        self.route(|j| row[j])
    }

    /// Predicts a full-width row through the minipatch column map
    /// (`columns[local] = global`).
    pub fn predict_projected(&self, row: &[T], columns: &[usize]) -> Label {
        self.route(|j| row[columns[j]])
    }

    /// Structural validity: child ids in range, local features below the
    /// width, leaf labels in `{-1, +1}`, and every node reachable once.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("malformed tree: {msg}")));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if id >= self.nodes.len() || seen[id] {
                return bad(format!("node {id} out of range or shared"));
            }
            seen[id] = true;
            match &self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= self.n_features || !threshold.is_finite() {
                        return bad(format!("split {id} on feature {feature}"));
                    }
                    stack.push(*left);
                    stack.push(*right);
                }
                Node::Leaf { label } if *label != 1 && *label != -1 => {
                    return bad(format!("leaf label {label}"));
                }
                Node::Leaf { .. } => {}
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            bad("unreachable nodes".into())
        }
    }
}

/// Sum over split nodes of `(node rows / root rows) * Gini decrease`, per
/// local feature, normalized to one.
pub fn impurity_importance<T: Scalar>(tree: &DecisionTree<T>) -> Result<ImportanceVector> {
    if tree.stats.len() != tree.nodes.len() {
        return Err(Error::MissingNodeStats);
    }
    let root = tree.stats[0].n_samples as f64;
    let mut scores = vec![0.0; tree.n_features];
    for (node, stat) in tree.nodes.iter().zip(&tree.stats) {
        if let Node::Split { feature, .. } = node {
            scores[*feature] += stat.n_samples as f64 / root * stat.impurity_decrease;
        }
    }
    Ok(ImportanceVector::from_raw(scores))
}

fn accuracy<T: Scalar>(tree: &DecisionTree<T>, x: &[T], n_features: usize, y: &[Label]) -> f64 {
    let hits = x
        .chunks_exact(n_features)
        .zip(y)
        .filter(|(row, &label)| tree.predict(row) == label)
        .count();
    hits as f64 / y.len() as f64
}

/// Mean accuracy drop after shuffling each column, over `repeats` shuffles,
/// clipped at zero and normalized to one.
pub fn permutation_importance<T: Scalar, R: Rng + ?Sized>(
    tree: &DecisionTree<T>,
    x: &[T],
    n_features: usize,
    y: &[Label],
    repeats: usize,
    rng: &mut R,
) -> ImportanceVector {
    if repeats == 0 || y.is_empty() || tree.n_splits() == 0 {
        return ImportanceVector::from_raw(vec![0.0; n_features]);
    }
    let baseline = accuracy(tree, x, n_features, y);
    let mut shuffled = x.to_vec();
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut scores = vec![0.0; n_features];
    for (j, score) in scores.iter_mut().enumerate() {
        let mut drop = 0.0;
        for _ in 0..repeats {
            order.shuffle(rng);
            for (i, &src) in order.iter().enumerate() {
                shuffled[i * n_features + j] = x[src * n_features + j];
            }
            drop += baseline - accuracy(tree, &shuffled, n_features, y);
        }
        for i in 0..y.len() {
            shuffled[i * n_features + j] = x[i * n_features + j];
        }
        *score = (drop / repeats as f64).max(0.0);
    }
    ImportanceVector::from_raw(scores)
}
