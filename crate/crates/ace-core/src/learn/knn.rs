//! Exact k-nearest-neighbor regression with deterministic tie-breaking.

use crate::{real, Real};

use super::FeatureMatrix;

pub(super) fn predict<F: Real>(
    queries: &FeatureMatrix<F>,
    k: usize,
    rows: &FeatureMatrix<F>,
    targets: &[F],
) -> Vec<F> {
    let n = rows.n_rows();
    let k = k.min(n);
    let mut out = Vec::with_capacity(queries.n_rows());
    let mut dists: Vec<(F, usize)> = Vec::with_capacity(n);
    for q in 0..queries.n_rows() {
        let query = queries.row(q);
        dists.clear();
        for r in 0..n {
            let row = rows.row(r);
            let mut d = F::zero();
            for (a, b) in query.iter().zip(row.iter()) {
                let diff = *a - *b;
                d += diff * diff;
            }
            dists.push((d, r));
        }
        // Distance ties break toward the lower row index.
        dists.sort_by(|(da, ia), (db, ib)| {
            da.partial_cmp(db)
                .expect("finite distances")
                .then(ia.cmp(ib))
        });
        let sum: F = dists[..k].iter().map(|&(_, r)| targets[r]).sum();
        out.push(sum / real(k as f64));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_break_toward_lower_index() {
        // Rows 0 and 2 are equidistant from the query; k=1 must pick row 0.
        let rows =
            FeatureMatrix::from_columns(vec!["x".into()], vec![vec![1.0, 5.0, 3.0]]).unwrap();
        let q = FeatureMatrix::from_columns(vec!["x".into()], vec![vec![2.0]]).unwrap();
        let pred = predict(&q, 1, &rows, &[10.0, 20.0, 30.0]);
        assert_eq!(pred, vec![10.0]);
    }
}
