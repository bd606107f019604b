//! Regression trees with exact greedy splits, shared by the boosted and
//! bagged ensembles.
//!
//! Splits minimize the within-node sum of squared errors over all features
//! and all midpoints between consecutive distinct values. Ties keep the
//! first candidate (lowest feature index, then lowest threshold), so tree
//! construction is fully deterministic.

use serde::{Deserialize, Serialize};

use crate::{real, Real};

use super::FeatureMatrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) enum Node<F> {
    Split {
        feature: usize,
        threshold: F,
        left: usize,
        right: usize,
    },
    Leaf {
        value: F,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct Tree<F> {
    nodes: Vec<Node<F>>,
}

impl<F: Real> Tree<F> {
    /// Fit on the given row indices (repeats allowed, as with bootstrap
    /// samples).
    pub(crate) fn fit(
        x: &FeatureMatrix<F>,
        targets: &[F],
        rows: &[usize],
        max_depth: usize,
        min_leaf: usize,
    ) -> Tree<F> {
        let mut tree = Tree { nodes: Vec::new() };
        let mut rows = rows.to_vec();
        tree.grow(x, targets, &mut rows, 0, max_depth, min_leaf);
        tree
    }

    fn grow(
        &mut self,
        x: &FeatureMatrix<F>,
        targets: &[F],
        rows: &mut [usize],
        depth: usize,
        max_depth: usize,
        min_leaf: usize,
    ) -> usize {
        let node_mean = {
            let sum: F = rows.iter().map(|&r| targets[r]).sum();
            sum / real(rows.len() as f64)
        };
        if depth >= max_depth || rows.len() < 2 * min_leaf {
            return self.push(Node::Leaf { value: node_mean });
        }
        match best_split(x, targets, rows, min_leaf) {
            None => self.push(Node::Leaf { value: node_mean }),
            Some((feature, threshold)) => {
                let split_at = partition(x, rows, feature, threshold);
                if split_at == 0 || split_at == rows.len() {
                    return self.push(Node::Leaf { value: node_mean });
                }
                let idx = self.push(Node::Leaf { value: node_mean });
                let (left_rows, right_rows) = rows.split_at_mut(split_at);
                let left = self.grow(x, targets, left_rows, depth + 1, max_depth, min_leaf);
                let right = self.grow(x, targets, right_rows, depth + 1, max_depth, min_leaf);
                self.nodes[idx] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                idx
            }
        }
    }

    fn push(&mut self, node: Node<F>) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub(crate) fn predict(&self, row: &[F]) -> F {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// Best (feature, threshold) by SSE reduction, or `None` when no split
/// respects `min_leaf` or improves on the parent.
fn best_split<F: Real>(
    x: &FeatureMatrix<F>,
    targets: &[F],
    rows: &[usize],
    min_leaf: usize,
) -> Option<(usize, F)> {
    let n = rows.len();
    let total: F = rows.iter().map(|&r| targets[r]).sum();
    let mut best: Option<(F, usize, F)> = None; // (score, feature, threshold)
    let mut order: Vec<usize> = Vec::with_capacity(n);

    for feature in 0..x.n_features() {
        order.clear();
        order.extend_from_slice(rows);
        order.sort_by(|&a, &b| {
            x.row(a)[feature]
                .partial_cmp(&x.row(b)[feature])
                .expect("finite features")
                .then(a.cmp(&b))
        });
        let mut left_sum = F::zero();
        for i in 1..n {
            left_sum += targets[order[i - 1]];
            let prev = x.row(order[i - 1])[feature];
            let here = x.row(order[i])[feature];
            if prev == here || i < min_leaf || n - i < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            // Maximizing sum^2/count on each side minimizes the SSE.
            let score = left_sum * left_sum / real(i as f64)
                + right_sum * right_sum / real((n - i) as f64);
            let threshold = (prev + here) / real(2.0);
            let better = match &best {
                None => true,
                Some((s, _, _)) => score > *s,
            };
            if better {
                best = Some((score, feature, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

/// In-place partition: rows with `x[feature] <= threshold` first. Returns
/// the boundary. Stable enough for determinism since the comparison is
/// exact.
fn partition<F: Real>(x: &FeatureMatrix<F>, rows: &mut [usize], feature: usize, threshold: F) -> usize {
    let mut boundary = 0;
    for i in 0..rows.len() {
        if x.row(rows[i])[feature] <= threshold {
            rows.swap(boundary, i);
            boundary += 1;
        }
    }
    boundary
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_a_step_function_exactly() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| if x < 10.0 { 1.0 } else { 5.0 }).collect();
        let x = FeatureMatrix::from_columns(vec!["x".into()], vec![xs]).unwrap();
        let rows: Vec<usize> = (0..20).collect();
        let tree = Tree::fit(&x, &ys, &rows, 2, 1);
        assert_eq!(tree.predict(&[3.0]), 1.0);
        assert_eq!(tree.predict(&[15.0]), 5.0);
    }

    #[test]
    fn min_leaf_blocks_tiny_splits() {
        let xs = vec![0.0, 1.0, 2.0, 3.0];
        let ys = vec![0.0, 0.0, 0.0, 100.0];
        let x = FeatureMatrix::from_columns(vec!["x".into()], vec![xs]).unwrap();
        let rows: Vec<usize> = (0..4).collect();
        let tree = Tree::fit(&x, &ys, &rows, 5, 2);
        // The only SSE-optimal cut (3 | 1) is forbidden, so the 2|2 cut wins.
        assert_eq!(tree.predict(&[0.5]), 0.0);
        assert_eq!(tree.predict(&[2.5]), 50.0);
    }

    #[test]
    fn constant_targets_make_a_single_leaf() {
        let xs = vec![0.0, 1.0, 2.0, 3.0];
        let ys = vec![2.0; 4];
        let x = FeatureMatrix::from_columns(vec!["x".into()], vec![xs]).unwrap();
        let rows: Vec<usize> = (0..4).collect();
        let tree = Tree::fit(&x, &ys, &rows, 3, 1);
        assert_eq!(tree.predict(&[-100.0]), 2.0);
        assert_eq!(tree.predict(&[100.0]), 2.0);
    }
}
