//! Pluggable supervised regression: the fit/predict layer the
//! residualization pipeline is built on. Every learner is deterministic
//! given its spec (including seed) and the training data.

mod boost;
mod forest;
mod knn;
mod linear;
mod tree;

pub(crate) use tree::Tree;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{real, Real};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("feature matrix has {x_rows} rows but the target has {y_len}")]
    RowMismatch { x_rows: usize, y_len: usize },
    #[error("learner needs at least {needed} rows, got {got}")]
    InsufficientRows { needed: usize, got: usize },
    #[error("feature names mismatch: trained on {expected:?}, got {got:?}")]
    FeatureMismatch { expected: Vec<String>, got: Vec<String> },
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid learner spec: {0}")]
    InvalidSpec(String),
    #[error("column `{name}` has {got} rows, expected {expected}")]
    ColumnLength { name: String, got: usize, expected: usize },
}

/// Row-major matrix of named features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix<F> {
    names: Vec<String>,
    data: Vec<F>,
    n_rows: usize,
    n_features: usize,
}

impl<F: Real> FeatureMatrix<F> {
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<F>>) -> Result<Self, LearnError> {
        assert_eq!(names.len(), columns.len(), "one name per column");
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(LearnError::DuplicateFeature(name.clone()));
            }
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        for (name, col) in names.iter().zip(columns.iter()) {
            if col.len() != n_rows {
                return Err(LearnError::ColumnLength {
                    name: name.clone(),
                    got: col.len(),
                    expected: n_rows,
                });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(LearnError::NonFinite(format!("feature `{name}`")));
            }
        }
        let n_features = names.len();
        let mut data = Vec::with_capacity(n_rows * n_features);
        for r in 0..n_rows {
            for col in &columns {
                data.push(col[r]);
            }
        }
        Ok(FeatureMatrix {
            names,
            data,
            n_rows,
            n_features,
        })
    }

    /// Single-column matrix.
    pub fn single(name: impl Into<String>, column: Vec<F>) -> Result<Self, LearnError> {
        Self::from_columns(vec![name.into()], vec![column])
    }

    /// A legal zero-feature matrix; fitting on it forces mean behavior.
    pub fn empty(n_rows: usize) -> Self {
        FeatureMatrix {
            names: Vec::new(),
            data: Vec::new(),
            n_rows,
            n_features: 0,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.n_features..(r + 1) * self.n_features]
    }

    pub fn column(&self, f: usize) -> impl Iterator<Item = F> + '_ {
        (0..self.n_rows).map(move |r| self.data[r * self.n_features + f])
    }

    /// Rows restricted to the given indices (indices may repeat).
    pub fn take_rows(&self, rows: &[usize]) -> FeatureMatrix<F> {
        let mut data = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            names: self.names.clone(),
            data,
            n_rows: rows.len(),
            n_features: self.n_features,
        }
    }
}

/// Learner families and their hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearnerKind {
    /// Constant prediction: the training-target mean.
    Mean,
    /// Polynomial least squares with intercept; per-feature powers
    /// `1..=degree`, no cross terms.
    LeastSquares {
        #[serde(default = "default_degree")]
        degree: usize,
    },
    /// k-nearest-neighbor averaging under euclidean distance; distance ties
    /// break toward the lower row index.
    KNearest { k: usize },
    /// Squared-error gradient boosting with exact greedy splits.
    GradientBoostedTrees {
        #[serde(default = "default_n_trees")]
        n_trees: usize,
        #[serde(default = "default_max_depth")]
        max_depth: usize,
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
        #[serde(default = "default_subsample")]
        subsample: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Bagged regression trees on bootstrap resamples, averaged. Defaults
    /// mirror the usual library forests: effectively unbounded depth and
    /// single-row leaves.
    RandomForestLike {
        #[serde(default = "default_forest_trees")]
        n_trees: usize,
        #[serde(default = "default_forest_depth")]
        max_depth: usize,
        #[serde(default = "default_forest_min_leaf")]
        min_leaf: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_degree() -> usize {
    1
}
fn default_n_trees() -> usize {
    200
}
fn default_forest_trees() -> usize {
    100
}
fn default_forest_depth() -> usize {
    32
}
fn default_forest_min_leaf() -> usize {
    1
}
fn default_max_depth() -> usize {
    3
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_min_leaf() -> usize {
    5
}
fn default_subsample() -> f64 {
    1.0
}

/// A learner choice plus the optional cross-fitting fold count used when the
/// pipeline's cross-fit flag is on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    #[serde(flatten)]
    pub kind: LearnerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_fit_folds: Option<usize>,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        LearnerSpec {
            kind,
            cross_fit_folds: None,
        }
    }

    pub fn mean() -> Self {
        Self::new(LearnerKind::Mean)
    }

    pub fn least_squares(degree: usize) -> Self {
        Self::new(LearnerKind::LeastSquares { degree })
    }

    pub fn k_nearest(k: usize) -> Self {
        Self::new(LearnerKind::KNearest { k })
    }

    pub fn boosted_trees_default(seed: u64) -> Self {
        Self::new(LearnerKind::GradientBoostedTrees {
            n_trees: default_n_trees(),
            max_depth: default_max_depth(),
            learning_rate: default_learning_rate(),
            min_leaf: default_min_leaf(),
            subsample: default_subsample(),
            seed,
        })
    }

    pub fn forest_default(seed: u64) -> Self {
        Self::new(LearnerKind::RandomForestLike {
            n_trees: default_forest_trees(),
            max_depth: default_forest_depth(),
            min_leaf: default_forest_min_leaf(),
            seed,
        })
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        match &self.kind {
            LearnerKind::Mean => {}
            LearnerKind::LeastSquares { degree } => {
                if *degree < 1 {
                    return Err(LearnError::InvalidSpec("degree must be >= 1".into()));
                }
            }
            LearnerKind::KNearest { k } => {
                if *k < 1 {
                    return Err(LearnError::InvalidSpec("k must be >= 1".into()));
                }
            }
            LearnerKind::GradientBoostedTrees {
                max_depth,
                learning_rate,
                min_leaf,
                subsample,
                ..
            } => {
                if *max_depth < 1 {
                    return Err(LearnError::InvalidSpec("max_depth must be >= 1".into()));
                }
                if !(*learning_rate > 0.0 && learning_rate.is_finite()) {
                    return Err(LearnError::InvalidSpec("learning_rate must be positive".into()));
                }
                if *min_leaf < 1 {
                    return Err(LearnError::InvalidSpec("min_leaf must be >= 1".into()));
                }
                if !(*subsample > 0.0 && *subsample <= 1.0) {
                    return Err(LearnError::InvalidSpec("subsample must be in (0, 1]".into()));
                }
            }
            LearnerKind::RandomForestLike {
                max_depth, min_leaf, ..
            } => {
                if *max_depth < 1 || *min_leaf < 1 {
                    return Err(LearnError::InvalidSpec(
                        "max_depth and min_leaf must be >= 1".into(),
                    ));
                }
            }
        }
        if let Some(folds) = self.cross_fit_folds {
            if folds < 2 {
                return Err(LearnError::InvalidSpec("cross_fit_folds must be >= 2".into()));
            }
        }
        Ok(())
    }

    fn min_rows(&self) -> usize {
        match &self.kind {
            LearnerKind::Mean => 1,
            LearnerKind::LeastSquares { degree } => degree + 1,
            LearnerKind::KNearest { k } => *k,
            LearnerKind::GradientBoostedTrees { .. } => 1,
            LearnerKind::RandomForestLike { .. } => 1,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) enum ModelState<F> {
    Mean {
        value: F,
    },
    Linear {
        degree: usize,
        target_mean: F,
        feature_means: Vec<F>,
        coefficients: Vec<F>,
    },
    KNearest {
        k: usize,
        rows: FeatureMatrix<F>,
        targets: Vec<F>,
    },
    Boosted {
        baseline: F,
        shrinkage: F,
        trees: Vec<Tree<F>>,
    },
    Forest {
        trees: Vec<Tree<F>>,
    },
}

/// Trained state of a learner; immutable and shareable. Prediction counts
/// are tracked for instrumentation and are not persisted.
#[derive(Debug, Serialize, Deserialize)]
pub struct FittedModel<F> {
    spec: LearnerSpec,
    feature_names: Vec<String>,
    state: ModelState<F>,
    ridge_fallback: bool,
    #[serde(skip, default)]
    calls: AtomicU64,
}

impl<F: Real> FittedModel<F> {
    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// True when rank deficiency forced the least-squares fit onto a ridge
    /// solution.
    pub fn used_ridge_fallback(&self) -> bool {
        self.ridge_fallback
    }

    /// Number of predict calls served so far.
    pub fn times_called(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Intercept and slope per expanded feature for linear states.
    pub fn linear_coefficients(&self) -> Option<(F, Vec<F>)> {
        match &self.state {
            ModelState::Linear {
                target_mean,
                feature_means,
                coefficients,
                ..
            } => {
                let mut intercept = *target_mean;
                for (c, m) in coefficients.iter().zip(feature_means.iter()) {
                    intercept = intercept - *c * *m;
                }
                Some((intercept, coefficients.clone()))
            }
            ModelState::Mean { value } => Some((*value, Vec::new())),
            _ => None,
        }
    }

    pub fn predict(&self, x: &FeatureMatrix<F>) -> Result<Vec<F>, LearnError> {
        if x.names() != self.feature_names.as_slice() {
            return Err(LearnError::FeatureMismatch {
                expected: self.feature_names.clone(),
                got: x.names().to_vec(),
            });
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let out = match &self.state {
            ModelState::Mean { value } => vec![*value; x.n_rows()],
            ModelState::Linear {
                degree,
                target_mean,
                feature_means,
                coefficients,
            } => linear::predict(x, *degree, *target_mean, feature_means, coefficients),
            ModelState::KNearest { k, rows, targets } => knn::predict(x, *k, rows, targets),
            ModelState::Boosted {
                baseline,
                shrinkage,
                trees,
            } => (0..x.n_rows())
                .map(|r| {
                    let mut acc = *baseline;
                    for t in trees {
                        acc += *shrinkage * t.predict(x.row(r));
                    }
                    acc
                })
                .collect(),
            ModelState::Forest { trees } => (0..x.n_rows())
                .map(|r| {
                    let sum: F = trees.iter().map(|t| t.predict(x.row(r))).sum();
                    sum / real(trees.len() as f64)
                })
                .collect(),
        };
        if let Some(bad) = out.iter().position(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite(format!("prediction row {bad}")));
        }
        Ok(out)
    }
}

/// Train a learner. A zero-feature matrix is legal for every kind and
/// forces mean behavior.
pub fn fit<F: Real>(
    spec: &LearnerSpec,
    x: &FeatureMatrix<F>,
    y: &[F],
) -> Result<FittedModel<F>, LearnError> {
    spec.validate()?;
    if x.n_rows() != y.len() {
        return Err(LearnError::RowMismatch {
            x_rows: x.n_rows(),
            y_len: y.len(),
        });
    }
    let needed = spec.min_rows();
    if y.len() < needed {
        return Err(LearnError::InsufficientRows {
            needed,
            got: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFinite("target".into()));
    }

    let mut ridge_fallback = false;
    let state = if x.n_features() == 0 {
        ModelState::Mean { value: mean(y) }
    } else {
        match &spec.kind {
            LearnerKind::Mean => ModelState::Mean { value: mean(y) },
            LearnerKind::LeastSquares { degree } => {
                let (coefficients, target_mean, feature_means, used_ridge) =
                    linear::fit(x, y, *degree)?;
                ridge_fallback = used_ridge;
                ModelState::Linear {
                    degree: *degree,
                    target_mean,
                    feature_means,
                    coefficients,
                }
            }
            LearnerKind::KNearest { k } => ModelState::KNearest {
                k: *k,
                rows: x.clone(),
                targets: y.to_vec(),
            },
            LearnerKind::GradientBoostedTrees {
                n_trees,
                max_depth,
                learning_rate,
                min_leaf,
                subsample,
                seed,
            } => {
                let (baseline, trees) = boost::fit(
                    x,
                    y,
                    *n_trees,
                    *max_depth,
                    real(*learning_rate),
                    *min_leaf,
                    *subsample,
                    *seed,
                );
                ModelState::Boosted {
                    baseline,
                    shrinkage: real(*learning_rate),
                    trees,
                }
            }
            LearnerKind::RandomForestLike {
                n_trees,
                max_depth,
                min_leaf,
                seed,
            } => ModelState::Forest {
                trees: forest::fit(x, y, *n_trees, *max_depth, *min_leaf, *seed),
            },
        }
    };
    Ok(FittedModel {
        spec: spec.clone(),
        feature_names: x.names().to_vec(),
        state,
        ridge_fallback,
        calls: AtomicU64::new(0),
    })
}

/// Train on the full data and additionally return out-of-fold predictions
/// from a deterministic round-robin K-fold split; used for cross-fitting.
pub fn fit_with_oof<F: Real>(
    spec: &LearnerSpec,
    x: &FeatureMatrix<F>,
    y: &[F],
    folds: usize,
) -> Result<(FittedModel<F>, Vec<F>), LearnError> {
    if folds < 2 {
        return Err(LearnError::InvalidSpec("cross_fit_folds must be >= 2".into()));
    }
    let n = y.len();
    let mut oof = vec![F::zero(); n];
    for fold in 0..folds {
        let train_rows: Vec<usize> = (0..n).filter(|r| r % folds != fold).collect();
        let test_rows: Vec<usize> = (0..n).filter(|r| r % folds == fold).collect();
        if test_rows.is_empty() {
            continue;
        }
        let x_train = x.take_rows(&train_rows);
        let y_train: Vec<F> = train_rows.iter().map(|&r| y[r]).collect();
        let model = fit(spec, &x_train, &y_train)?;
        let preds = model.predict(&x.take_rows(&test_rows))?;
        for (pos, &r) in test_rows.iter().enumerate() {
            oof[r] = preds[pos];
        }
    }
    let full = fit(spec, x, y)?;
    Ok((full, oof))
}

pub(crate) fn mean<F: Real>(values: &[F]) -> F {
    let sum: F = values.iter().copied().sum();
    sum / real(values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(names: &[&str], cols: Vec<Vec<f64>>) -> FeatureMatrix<f64> {
        FeatureMatrix::from_columns(names.iter().map(|s| s.to_string()).collect(), cols).unwrap()
    }

    #[test]
    fn least_squares_recovers_an_exact_line() {
        let x = fm(&["x"], vec![vec![0.0, 1.0, 2.0]]);
        let m = fit(&LearnerSpec::least_squares(1), &x, &[1.0, 3.0, 5.0]).unwrap();
        let (intercept, slopes) = m.linear_coefficients().unwrap();
        assert!((intercept - 1.0).abs() < 1e-12);
        assert!((slopes[0] - 2.0).abs() < 1e-12);
        let pred = m.predict(&fm(&["x"], vec![vec![3.0]])).unwrap();
        assert!((pred[0] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn mean_learner_is_constant() {
        let x = fm(&["x"], vec![vec![0.0, 1.0, 2.0]]);
        let m = fit(&LearnerSpec::mean(), &x, &[1.0, 2.0, 3.0]).unwrap();
        let pred = m.predict(&fm(&["x"], vec![vec![100.0, -5.0]])).unwrap();
        assert_eq!(pred, vec![2.0, 2.0]);
    }

    #[test]
    fn knn_two_nearest_average() {
        let x = fm(&["x"], vec![vec![0.0, 1.0, 10.0]]);
        let m = fit(&LearnerSpec::k_nearest(2), &x, &[0.0, 1.0, 10.0]).unwrap();
        let pred = m.predict(&fm(&["x"], vec![vec![0.4]])).unwrap();
        assert!((pred[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn knn_k1_reproduces_training_targets() {
        let x = fm(&["a", "b"], vec![vec![0.0, 1.0, 2.0], vec![5.0, 4.0, 3.0]]);
        let y = [7.0, -1.0, 2.5];
        let m = fit(&LearnerSpec::k_nearest(1), &x, &y).unwrap();
        let pred = m.predict(&x).unwrap();
        assert_eq!(pred, y.to_vec());
    }

    #[test]
    fn gbt_with_zero_trees_is_the_global_mean() {
        let x = fm(&["x"], vec![vec![0.0, 1.0, 2.0, 3.0]]);
        let spec = LearnerSpec::new(LearnerKind::GradientBoostedTrees {
            n_trees: 0,
            max_depth: 3,
            learning_rate: 0.1,
            min_leaf: 1,
            subsample: 1.0,
            seed: 1,
        });
        let m = fit(&spec, &x, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let pred = m.predict(&fm(&["x"], vec![vec![-10.0, 10.0]])).unwrap();
        assert_eq!(pred, vec![2.5, 2.5]);
    }

    #[test]
    fn zero_feature_matrix_forces_mean() {
        let x = FeatureMatrix::<f64>::empty(3);
        let spec = LearnerSpec::boosted_trees_default(0);
        let m = fit(&spec, &x, &[1.0, 2.0, 6.0]).unwrap();
        let pred = m.predict(&FeatureMatrix::empty(2)).unwrap();
        assert_eq!(pred, vec![3.0, 3.0]);
    }

    #[test]
    fn predict_rejects_wrong_names() {
        let x = fm(&["x"], vec![vec![0.0, 1.0]]);
        let m = fit(&LearnerSpec::mean(), &x, &[1.0, 2.0]).unwrap();
        let err = m.predict(&fm(&["y"], vec![vec![0.0]])).unwrap_err();
        assert!(matches!(err, LearnError::FeatureMismatch { .. }));
    }

    #[test]
    fn fit_rejects_row_mismatch_and_short_data() {
        let x = fm(&["x"], vec![vec![0.0, 1.0]]);
        assert!(matches!(
            fit(&LearnerSpec::mean(), &x, &[1.0]).unwrap_err(),
            LearnError::RowMismatch { .. }
        ));
        assert!(matches!(
            fit(&LearnerSpec::k_nearest(3), &x, &[1.0, 2.0]).unwrap_err(),
            LearnError::InsufficientRows { needed: 3, got: 2 }
        ));
    }

    #[test]
    fn determinism_bitwise() {
        let mut rng = crate::rng::Rng::from_seed(9);
        let xs: Vec<f64> = (0..300).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x.sin() * 2.0 + rng.normal(0.0, 0.1))
            .collect();
        let x = fm(&["x"], vec![xs.clone()]);
        for spec in [
            LearnerSpec::boosted_trees_default(77),
            LearnerSpec::forest_default(77),
            LearnerSpec::least_squares(3),
            LearnerSpec::k_nearest(5),
        ] {
            let m1 = fit(&spec, &x, &ys).unwrap();
            let m2 = fit(&spec, &x, &ys).unwrap();
            let p1 = m1.predict(&x).unwrap();
            let p2 = m2.predict(&x).unwrap();
            for (a, b) in p1.iter().zip(p2.iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn gbt_training_loss_non_increasing() {
        let mut rng = crate::rng::Rng::from_seed(3);
        let xs: Vec<f64> = (0..200).map(|_| rng.uniform(0.0, 4.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 1.3).cos() + rng.normal(0.0, 0.2)).collect();
        let x = fm(&["x"], vec![xs.clone()]);
        let mut last = f64::INFINITY;
        for rounds in [0usize, 1, 2, 5, 10, 25, 50] {
            let spec = LearnerSpec::new(LearnerKind::GradientBoostedTrees {
                n_trees: rounds,
                max_depth: 3,
                learning_rate: 0.2,
                min_leaf: 5,
                subsample: 1.0,
                seed: 4,
            });
            let m = fit(&spec, &x, &ys).unwrap();
            let pred = m.predict(&x).unwrap();
            let mse: f64 = pred
                .iter()
                .zip(ys.iter())
                .map(|(p, y)| (p - y) * (p - y))
                .sum::<f64>()
                / ys.len() as f64;
            assert!(
                mse <= last + 1e-12,
                "loss increased at {rounds} rounds: {mse} > {last}"
            );
            last = mse;
        }
    }

    #[test]
    fn knn_prediction_is_a_convex_combination() {
        let mut rng = crate::rng::Rng::from_seed(5);
        let xs: Vec<f64> = (0..100).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let ys: Vec<f64> = (0..100).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let (lo, hi) = ys.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
        let x = fm(&["x"], vec![xs]);
        let m = fit(&LearnerSpec::k_nearest(7), &x, &ys).unwrap();
        let queries = fm(&["x"], vec![(0..50).map(|i| -2.0 + 0.08 * i as f64).collect()]);
        for p in m.predict(&queries).unwrap() {
            assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }

    #[test]
    fn ols_residuals_orthogonal_to_features() {
        let mut rng = crate::rng::Rng::from_seed(11);
        let a: Vec<f64> = (0..400).map(|_| rng.normal(0.0, 1.0)).collect();
        let b: Vec<f64> = (0..400).map(|_| rng.normal(0.0, 2.0)).collect();
        let y: Vec<f64> = a
            .iter()
            .zip(b.iter())
            .map(|(u, v)| 1.5 * u - 0.3 * v + rng.normal(0.0, 0.5))
            .collect();
        let x = fm(&["a", "b"], vec![a.clone(), b.clone()]);
        let m = fit(&LearnerSpec::least_squares(1), &x, &y).unwrap();
        let pred = m.predict(&x).unwrap();
        let resid: Vec<f64> = y.iter().zip(pred.iter()).map(|(u, v)| u - v).collect();
        let scale: f64 = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let mean_r = resid.iter().sum::<f64>() / resid.len() as f64;
        assert!(mean_r.abs() < 1e-8 * scale);
        for col in [&a, &b] {
            let dot: f64 = resid.iter().zip(col.iter()).map(|(r, c)| r * c).sum();
            assert!((dot / resid.len() as f64).abs() < 1e-8 * scale.max(1.0));
        }
    }

    #[test]
    fn rank_deficiency_falls_back_to_ridge() {
        // Two identical columns cannot be solved by plain normal equations.
        let x = fm(
            &["a", "b"],
            vec![vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.0]],
        );
        let m = fit(&LearnerSpec::least_squares(1), &x, &[2.0, 4.0, 6.0, 8.0]).unwrap();
        assert!(m.used_ridge_fallback());
        let pred = m.predict(&x).unwrap();
        for (p, want) in pred.iter().zip([2.0, 4.0, 6.0, 8.0]) {
            assert!((p - want).abs() < 1e-3);
        }
    }

    #[test]
    fn oof_predictions_differ_from_in_sample() {
        let mut rng = crate::rng::Rng::from_seed(21);
        let xs: Vec<f64> = (0..120).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x + rng.normal(0.0, 0.3)).collect();
        let x = fm(&["x"], vec![xs]);
        let (full, oof) = fit_with_oof(&LearnerSpec::k_nearest(1), &x, &ys, 4).unwrap();
        let in_sample = full.predict(&x).unwrap();
        // k=1 in-sample memorizes; out-of-fold cannot.
        assert_eq!(in_sample, ys);
        assert!(oof.iter().zip(ys.iter()).any(|(a, b)| a != b));
    }
}
