use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{CartConfig, Matrix};
use crate::record::Class;

/// Tree nodes live in an arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CartNode {
    Leaf {
        class: Class,
        counts: [usize; 2],
    },
    /// `row[feature] < threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        counts: [usize; 2],
    },
}

impl CartNode {
    pub fn counts(&self) -> [usize; 2] {
        match self {
            CartNode::Leaf { counts, .. } | CartNode::Split { counts, .. } => *counts,
        }
    }

    /// Share of abnormal training rows that reached this node.
    pub fn abnormal_fraction(&self) -> f64 {
        let [n, a] = self.counts();
        a as f64 / (n + a) as f64
    }
}

/// Binary CART classifier grown greedily on Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartModel {
    n_features: usize,
    nodes: Vec<CartNode>,
}

pub(crate) fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

fn majority(counts: [usize; 2]) -> Class {
    if counts[1] >= counts[0] {
        Class::Abnormal
    } else {
        Class::Normal
    }
}

struct Builder<'a> {
    cfg: &'a CartConfig,
    x: &'a Matrix,
    y: &'a [Class],
    nodes: Vec<CartNode>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> [usize; 2] {
        let mut c = [0, 0];
        for &i in idx {
            c[self.y[i].as_index()] += 1;
        }
        c
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let id = self.nodes.len();
        self.nodes.push(CartNode::Leaf {
            class: majority(counts),
            counts,
        });
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_leaf {
            return id;
        }
        let Some(best) = self.best_split(&idx, counts) else {
            return id;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x.row(i)[best.feature] < best.threshold);
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[id] = CartNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            counts,
        };
        id
    }

    fn best_split(&self, idx: &[usize], counts: [usize; 2]) -> Option<BestSplit> {
        let n = idx.len();
        let min_leaf = self.cfg.min_leaf;
        let parent = gini(counts);
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        for f in 0..self.x.cols() {
            let value = |i: usize| self.x.row(i)[f];
            order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
            let mut left = [0usize; 2];
            for pos in 0..n - 1 {
                left[self.y[order[pos]].as_index()] += 1;
                let n_left = pos + 1;
                let n_right = n - n_left;
                if n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let (a, b) = (value(order[pos]), value(order[pos + 1]));
                if a >= b {
                    continue;
                }
                let right = [counts[0] - left[0], counts[1] - left[1]];
                let impurity =
                    (n_left as f64 * gini(left) + n_right as f64 * gini(right)) / n as f64;
                let bar = best.as_ref().map_or(parent - 1e-12, |b| b.impurity);
                if impurity < bar {
                    let mid = a + (b - a) / 2.0;
                    best = Some(BestSplit {
                        feature: f,
                        threshold: if mid > a { mid } else { b },
                        impurity,
                    });
                }
            }
        }
        best
    }
}

impl CartModel {
    pub(super) fn fit(cfg: &CartConfig, x: &Matrix, y: &[Class]) -> Self {
        let mut builder = Builder {
            cfg,
            x,
            y,
            nodes: Vec::new(),
        };
        builder.grow((0..x.rows()).collect(), 0);
        CartModel {
            n_features: x.cols(),
            nodes: builder.nodes,
        }
    }

    /// Assembles a tree from explicit nodes; node 0 is the root.
    pub fn from_nodes(n_features: usize, nodes: Vec<CartNode>) -> Self {
        CartModel { n_features, nodes }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[CartNode] {
        &self.nodes
    }

    /// Index of the leaf `row` falls into.
    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                CartNode::Leaf { .. } => return at,
                CartNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    at = if row[*feature] < *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> Class {
        match &self.nodes[self.leaf_of(row)] {
            CartNode::Leaf { class, .. } => *class,
            CartNode::Split { .. } => unreachable!("leaf_of returns a leaf"),
        }
    }

    /// Depth of the deepest leaf (a lone root is depth 0).
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[CartNode], at: usize) -> usize {
            match &nodes[at] {
                CartNode::Leaf { .. } => 0,
                CartNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}
