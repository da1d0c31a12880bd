//! Depth-bounded CART classifier with class-balanced weighted Gini splits.
//!
//! Determinism contract: one ChaCha stream per tree drives the per-node
//! feature subsample; candidate features are evaluated in ascending index
//! order and thresholds in ascending value order, and a split replaces the
//! incumbent only when strictly better, so ties resolve to the first
//! candidate. Class counts are kept as integers and weighted only inside
//! the score, which keeps scores exactly scale-equivariant: duplicating
//! every training row (with doubled size thresholds) reproduces the same
//! tree bit for bit.

use ndarray::ArrayView2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A node in the arena; `feature < 0` marks a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: i32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    pub n_samples: u32,
    pub p_neg: f64,
    pub p_pos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub min_split: usize,
    /// Features tried per node; defaults to ceil(sqrt(d)).
    pub mtry: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 6, min_leaf: 30, min_split: 60, mtry: None }
    }
}

impl TreeParams {
    pub fn effective_mtry(&self, n_features: usize) -> usize {
        let m = self.mtry.unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize);
        m.clamp(1, n_features)
    }
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [bool],
    weights: [f64; 2],
    params: TreeParams,
    mtry: usize,
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let node = &self.nodes[i];
            if node.feature < 0 {
                return node.p_pos;
            }
            i = if row[node.feature as usize] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            let n = &nodes[i];
            if n.feature < 0 {
                0
            } else {
                1 + walk(nodes, n.left as usize).max(walk(nodes, n.right as usize))
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Class weights balancing the drawn sample: `n / (2 * n_class)`.
pub fn balanced_weights(y: &[bool], rows: &[usize]) -> [f64; 2] {
    let n_pos = rows.iter().filter(|&&i| y[i]).count();
    let n_neg = rows.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return [1.0, 1.0];
    }
    let n = rows.len() as f64;
    [n / (2.0 * n_neg as f64), n / (2.0 * n_pos as f64)]
}

/// Fit one tree on the given (possibly repeated) row indices, using
/// balanced class weights for impurity and leaf probabilities.
pub fn fit_tree<'a>(
    x: ArrayView2<'a, f64>,
    y: &'a [bool],
    rows: Vec<usize>,
    rng: &mut ChaCha8Rng,
    params: &TreeParams,
) -> Tree {
    let weights = balanced_weights(y, &rows);
    fit_tree_with_weights(x, y, rows, weights, rng, params)
}

/// Same as [`fit_tree`] but with caller-chosen class weights
/// `[w_neg, w_pos]`.
pub fn fit_tree_with_weights<'a>(
    x: ArrayView2<'a, f64>,
    y: &'a [bool],
    rows: Vec<usize>,
    weights: [f64; 2],
    rng: &mut ChaCha8Rng,
    params: &TreeParams,
) -> Tree {
    assert!(!rows.is_empty(), "cannot fit a tree on zero rows");
    let mtry = params.effective_mtry(x.ncols());
    let mut b = Builder { x, y, weights, params: *params, mtry, nodes: Vec::new() };
    b.build(rows, 0, rng);
    Tree { nodes: b.nodes }
}

impl Builder<'_> {
    fn class_counts(&self, rows: &[usize]) -> [usize; 2] {
        let pos = rows.iter().filter(|&&i| self.y[i]).count();
        [rows.len() - pos, pos]
    }

    fn leaf(&mut self, rows: &[usize]) -> u32 {
        let [n_neg, n_pos] = self.class_counts(rows);
        let w_neg = n_neg as f64 * self.weights[0];
        let w_pos = n_pos as f64 * self.weights[1];
        let total = w_neg + w_pos;
        let p_pos = if total > 0.0 { w_pos / total } else { 0.5 };
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node {
            feature: -1,
            threshold: 0.0,
            left: 0,
            right: 0,
            n_samples: rows.len() as u32,
            p_neg: 1.0 - p_pos,
            p_pos,
        });
        idx
    }

    /// Weighted half-Gini of one side: w_neg * w_pos / (w_neg + w_pos).
    fn side_score(&self, n_neg: usize, n_pos: usize) -> f64 {
        let wn = n_neg as f64 * self.weights[0];
        let wp = n_pos as f64 * self.weights[1];
        let total = wn + wp;
        if total <= 0.0 {
            0.0
        } else {
            wn * wp / total
        }
    }

    fn best_split_on(&self, rows: &[usize], feature: usize) -> Option<(f64, f64)> {
        let [total_neg, total_pos] = self.class_counts(rows);
        let mut vals: Vec<(f64, bool)> =
            rows.iter().map(|&i| (self.x[[i, feature]], self.y[i])).collect();
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = vals.len();
        let mut best: Option<(f64, f64)> = None;
        let mut left_neg = 0usize;
        let mut left_pos = 0usize;
        let mut i = 0usize;
        while i < n {
            // Absorb the whole run of equal values.
            let v = vals[i].0;
            while i < n && vals[i].0 == v {
                if vals[i].1 {
                    left_pos += 1;
                } else {
                    left_neg += 1;
                }
                i += 1;
            }
            if i == n {
                break;
            }
            let left_n = left_neg + left_pos;
            if left_n < self.params.min_leaf || n - left_n < self.params.min_leaf {
                continue;
            }
            let threshold = (v + vals[i].0) / 2.0;
            let score = self.side_score(left_neg, left_pos)
                + self.side_score(total_neg - left_neg, total_pos - left_pos);
            let better = match best {
                None => true,
                Some((s, _)) => score < s,
            };
            if better {
                best = Some((score, threshold));
            }
        }
        best
    }

    fn sample_features(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let d = self.x.ncols();
        let mut pool: Vec<usize> = (0..d).collect();
        for j in 0..self.mtry {
            let k = rng.gen_range(j..d);
            pool.swap(j, k);
        }
        let mut chosen = pool[..self.mtry].to_vec();
        chosen.sort_unstable();
        chosen
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let [n_neg, n_pos] = self.class_counts(&rows);
        if depth >= self.params.max_depth
            || rows.len() < self.params.min_split
            || n_neg == 0
            || n_pos == 0
        {
            return self.leaf(&rows);
        }
        // The feature draw happens before the split search so the stream
        // position is a function of node visit order alone.
        let features = self.sample_features(rng);
        let mut best: Option<(f64, usize, f64)> = None;
        for f in features {
            if let Some((score, threshold)) = self.best_split_on(&rows, f) {
                let better = match best {
                    None => true,
                    Some((s, _, _)) => score < s,
                };
                if better {
                    best = Some((score, f, threshold));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return self.leaf(&rows);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x[[i, feature]] <= threshold);
        let [n_neg_all, n_pos_all] = self.class_counts(&rows);
        let w_neg = n_neg_all as f64 * self.weights[0];
        let w_pos = n_pos_all as f64 * self.weights[1];
        let p_pos = w_pos / (w_neg + w_pos);
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node {
            feature: feature as i32,
            threshold,
            left: 0,
            right: 0,
            n_samples: rows.len() as u32,
            p_neg: 1.0 - p_pos,
            p_pos,
        });
        let left = self.build(left_rows, depth + 1, rng);
        let right = self.build(right_rows, depth + 1, rng);
        self.nodes[idx as usize].left = left;
        self.nodes[idx as usize].right = right;
        idx
    }
}
