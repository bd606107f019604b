//! Squared-error gradient boosting: each round fits a tree to the current
//! residuals and the ensemble moves by `learning_rate` times the leaf mean.

use crate::rng::Rng;
use crate::Real;

use super::{mean, FeatureMatrix, Tree};

#[allow(clippy::too_many_arguments)]
pub(super) fn fit<F: Real>(
    x: &FeatureMatrix<F>,
    y: &[F],
    n_trees: usize,
    max_depth: usize,
    learning_rate: F,
    min_leaf: usize,
    subsample: f64,
    seed: u64,
) -> (F, Vec<Tree<F>>) {
    let n = y.len();
    let baseline = mean(y);
    let mut residuals: Vec<F> = y.iter().map(|v| *v - baseline).collect();
    let mut trees = Vec::with_capacity(n_trees);
    let mut rng = Rng::from_seed(seed);
    let all_rows: Vec<usize> = (0..n).collect();
    let sample_size = ((subsample * n as f64).floor() as usize).clamp(1, n);

    for _ in 0..n_trees {
        let rows = if sample_size == n {
            all_rows.clone()
        } else {
            sample_without_replacement(&mut rng, n, sample_size)
        };
        let tree = Tree::fit(x, &residuals, &rows, max_depth, min_leaf);
        for (r, resid) in residuals.iter_mut().enumerate() {
            *resid = *resid - learning_rate * tree.predict(x.row(r));
        }
        trees.push(tree);
    }
    (baseline, trees)
}

/// First `k` elements of a seeded Fisher-Yates pass, sorted for
/// deterministic tree construction.
fn sample_without_replacement(rng: &mut Rng, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below((n - i) as u64) as usize;
        pool.swap(i, j);
    }
    let mut out = pool[..k].to_vec();
    out.sort_unstable();
    out
}
