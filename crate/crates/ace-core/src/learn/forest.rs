//! Bagged regression trees: each tree trains on a bootstrap resample and
//! predictions average over the ensemble.

use crate::rng::Rng;
use crate::Real;

use super::{FeatureMatrix, Tree};

pub(super) fn fit<F: Real>(
    x: &FeatureMatrix<F>,
    y: &[F],
    n_trees: usize,
    max_depth: usize,
    min_leaf: usize,
    seed: u64,
) -> Vec<Tree<F>> {
    let n = y.len();
    let mut rng = Rng::from_seed(seed);
    let mut trees = Vec::with_capacity(n_trees.max(1));
    let rounds = n_trees.max(1); // an empty forest cannot predict
    for _ in 0..rounds {
        let mut rows: Vec<usize> = (0..n).map(|_| rng.below(n as u64) as usize).collect();
        rows.sort_unstable();
        trees.push(Tree::fit(x, y, &rows, max_depth, min_leaf));
    }
    trees
}
