//! Polynomial least squares on centered features via normal equations,
//! with a ridge fallback on rank deficiency.

use crate::{real, Real};

use super::{FeatureMatrix, LearnError};

/// Expanded feature `j` of a row: powers `1..=degree` per original column.
fn expanded<F: Real>(row: &[F], degree: usize, j: usize) -> F {
    let col = j / degree;
    let power = (j % degree) + 1;
    let mut v = F::one();
    for _ in 0..power {
        v = v * row[col];
    }
    v
}

/// Fit on centered expanded features. Returns (coefficients, target mean,
/// expanded-feature means, ridge_used).
pub(super) fn fit<F: Real>(
    x: &FeatureMatrix<F>,
    y: &[F],
    degree: usize,
) -> Result<(Vec<F>, F, Vec<F>, bool), LearnError> {
    let n = x.n_rows();
    let p = x.n_features() * degree;
    let n_f = real::<F>(n as f64);

    let mut feature_means = vec![F::zero(); p];
    for r in 0..n {
        let row = x.row(r);
        for (j, m) in feature_means.iter_mut().enumerate() {
            *m += expanded(row, degree, j);
        }
    }
    for m in &mut feature_means {
        *m /= n_f;
    }
    let target_mean = super::mean(y);

    // Normal equations on centered data: A = Xc' Xc, b = Xc' yc.
    let mut a = vec![F::zero(); p * p];
    let mut b = vec![F::zero(); p];
    let mut centered = vec![F::zero(); p];
    for r in 0..n {
        let row = x.row(r);
        for (j, c) in centered.iter_mut().enumerate() {
            *c = expanded(row, degree, j) - feature_means[j];
        }
        let yc = y[r] - target_mean;
        for i in 0..p {
            b[i] += centered[i] * yc;
            for j in i..p {
                a[i * p + j] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            a[i * p + j] = a[j * p + i];
        }
    }

    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(LearnError::NonFinite("normal equations".into()));
    }

    match solve(&a, &b, p) {
        Some(coefficients) => Ok((coefficients, target_mean, feature_means, false)),
        None => {
            // Rank deficient: shrink toward zero just enough to invert.
            let mut trace = F::zero();
            for i in 0..p {
                trace += a[i * p + i];
            }
            let lambda = real::<F>(1e-8) * (F::one() + trace / real(p as f64));
            let mut ridged = a.clone();
            for i in 0..p {
                ridged[i * p + i] += lambda;
            }
            let coefficients = solve(&ridged, &b, p)
                .ok_or_else(|| LearnError::NonFinite("ridge system".into()))?;
            Ok((coefficients, target_mean, feature_means, true))
        }
    }
}

pub(super) fn predict<F: Real>(
    x: &FeatureMatrix<F>,
    degree: usize,
    target_mean: F,
    feature_means: &[F],
    coefficients: &[F],
) -> Vec<F> {
    (0..x.n_rows())
        .map(|r| {
            let row = x.row(r);
            let mut acc = target_mean;
            for (j, c) in coefficients.iter().enumerate() {
                acc += *c * (expanded(row, degree, j) - feature_means[j]);
            }
            acc
        })
        .collect()
}

/// Gaussian elimination with partial pivoting; `None` on (near-)singularity.
fn solve<F: Real>(a: &[F], b: &[F], p: usize) -> Option<Vec<F>> {
    if p == 0 {
        return Some(Vec::new());
    }
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m
        .iter()
        .map(|v| v.abs())
        .fold(F::zero(), F::max)
        .max(F::one());
    let tol = F::epsilon() * scale * real(p as f64) * real(16.0);

    for col in 0..p {
        let mut pivot_row = col;
        let mut pivot_val = m[col * p + col].abs();
        for r in col + 1..p {
            let v = m[r * p + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val <= tol {
            return None;
        }
        if pivot_row != col {
            for j in 0..p {
                m.swap(col * p + j, pivot_row * p + j);
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = m[col * p + col];
        for r in col + 1..p {
            let factor = m[r * p + col] / pivot;
            if factor == F::zero() {
                continue;
            }
            for j in col..p {
                let v = m[col * p + j];
                m[r * p + j] = m[r * p + j] - factor * v;
            }
            let v = rhs[col];
            rhs[r] = rhs[r] - factor * v;
        }
    }

    let mut out = vec![F::zero(); p];
    for col in (0..p).rev() {
        let mut acc = rhs[col];
        for j in col + 1..p {
            acc = acc - m[col * p + j] * out[j];
        }
        out[col] = acc / m[col * p + col];
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}
