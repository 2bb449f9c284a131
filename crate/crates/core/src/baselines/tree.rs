//! Greedy CART with Gini impurity.

use alloc::boxed::Box;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("no training rows")]
    Empty,
    #[error("max depth must lie in 1..=5, got {0}")]
    Depth(usize),
    #[error("{rows} rows of width {width} do not match {labels} labels")]
    Shape {
        rows: usize,
        width: usize,
        labels: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum TreeNode {
    /// Positive-class log-odds (with half-count smoothing).
    Leaf { score: f64 },
    /// Rows with `value <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreeModel {
    pub max_depth: usize,
    pub root: TreeNode,
}

impl TreeModel {
    pub fn depth(&self) -> usize {
        fn go(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(left).max(go(right)),
            }
        }
        go(&self.root)
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { score } => return *score,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    /// `(feature, threshold)` of every split in preorder.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        fn go(n: &TreeNode, out: &mut Vec<(usize, f64)>) {
            if let TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } = n
            {
                out.push((*feature, *threshold));
                go(left, out);
                go(right, out);
            }
        }
        let mut out = Vec::new();
        go(&self.root, &mut out);
        out
    }
}

pub fn tree_predict(model: &TreeModel, row: &[f64]) -> bool {
    model.score(row) > 0.0
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

fn leaf(pos: usize, n: usize) -> TreeNode {
    let neg = n - pos;
    TreeNode::Leaf {
        score: libm::log((pos as f64 + 0.5) / (neg as f64 + 0.5)),
    }
}

struct Best {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Lowest weighted child impurity over every feature and midpoint
/// threshold; ties keep the lower feature index, then the lower threshold.
fn best_split(rows: &[f64], width: usize, labels: &[bool], idx: &[usize]) -> Option<Best> {
    let n = idx.len();
    let total_pos = idx.iter().filter(|&&i| labels[i]).count();
    let mut best: Option<Best> = None;
    let mut order: Vec<(f64, bool)> = Vec::with_capacity(n);
    for f in 0..width {
        order.clear();
        order.extend(idx.iter().map(|&i| (rows[i * width + f], labels[i])));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_pos = 0;
        for k in 0..n - 1 {
            if order[k].1 {
                left_pos += 1;
            }
            let (a, b) = (order[k].0, order[k + 1].0);
            if a == b {
                continue;
            }
            let nl = k + 1;
            let nr = n - nl;
            let imp = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(total_pos - left_pos, nr)) / n as f64;
            if best.as_ref().is_none_or(|b| imp < b.impurity) {
                best = Some(Best {
                    feature: f,
                    threshold: a + (b - a) / 2.0,
                    impurity: imp,
                });
            }
        }
    }
    best
}

fn grow(rows: &[f64], width: usize, labels: &[bool], idx: Vec<usize>, depth_left: usize) -> TreeNode {
    let n = idx.len();
    let pos = idx.iter().filter(|&&i| labels[i]).count();
    let here = gini(pos, n);
    if depth_left == 0 || pos == 0 || pos == n {
        return leaf(pos, n);
    }
    let Some(split) = best_split(rows, width, labels, &idx) else {
        return leaf(pos, n);
    };
    if split.impurity >= here {
        return leaf(pos, n);
    }
    let (l, r): (Vec<usize>, Vec<usize>) = idx
        .into_iter()
        .partition(|&i| rows[i * width + split.feature] <= split.threshold);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(rows, width, labels, l, depth_left - 1)),
        right: Box::new(grow(rows, width, labels, r, depth_left - 1)),
    }
}

/// Fits a greedy Gini tree on row-major `rows` of the given `width`.
pub fn tree_fit(rows: &[f64], width: usize, labels: &[bool], max_depth: usize) -> Result<TreeModel, TreeError> {
    if !(1..=5).contains(&max_depth) {
        return Err(TreeError::Depth(max_depth));
    }
    if labels.is_empty() {
        return Err(TreeError::Empty);
    }
    if width == 0 || rows.len() != width * labels.len() {
        return Err(TreeError::Shape {
            rows: rows.len().checked_div(width).unwrap_or(0),
            width,
            labels: labels.len(),
        });
    }
    let idx: Vec<usize> = (0..labels.len()).collect();
    Ok(TreeModel {
        max_depth,
        root: grow(rows, width, labels, idx, max_depth),
    })
}
