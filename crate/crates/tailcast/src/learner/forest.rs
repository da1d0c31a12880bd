//! Bagged ensemble of balanced-weight trees.
//!
//! Each tree owns an independent ChaCha stream keyed by `seed ^ index`.
//! The bootstrap is drawn from that stream before anything else, so which
//! rows a tree trains on depends only on the seed, the tree index and the
//! number of training rows, never on the feature count or subsampling.

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec;
use crate::learner::tree::{fit_tree, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    #[serde(flatten)]
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 200, tree: TreeParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub seed: u64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index as u64)
}

/// The bootstrap draw for one tree: `n` uniform indices in order.
pub(crate) fn bootstrap_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

pub fn fit_forest<'a>(
    x: ArrayView2<'a, f64>,
    y: &'a [bool],
    params: &ForestParams,
    seed: u64,
) -> Forest {
    assert_eq!(x.nrows(), y.len(), "feature rows and labels must align");
    let indices: Vec<usize> = (0..params.n_trees).collect();
    let trees = exec::par_map(&indices, |&i| {
        let mut rng = tree_rng(seed, i);
        let rows = bootstrap_rows(&mut rng, x.nrows());
        fit_tree(x, y, rows, &mut rng, &params.tree)
    });
    Forest { seed, n_features: x.ncols(), trees }
}

impl Forest {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.n_features);
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        exec::par_map(&rows, |r| self.predict_row(r))
    }
}
