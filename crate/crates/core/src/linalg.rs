//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// `X^T diag(w) X`.
pub fn weighted_gram(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut xw = x.clone();
    for (i, mut row) in xw.row_iter_mut().enumerate() {
        row *= w[i];
    }
    x.tr_mul(&xw)
}

/// `X^T diag(w) y`.
pub fn weighted_cross(x: &DMatrix<f64>, w: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    x.tr_mul(&w.component_mul(y))
}

/// Solve a symmetric positive-definite system by Cholesky.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    match Cholesky::new(a.clone()) {
        Some(chol) => {
            let sol = chol.solve(b);
            if sol.iter().all(|v| v.is_finite()) {
                Ok(sol)
            } else {
                Err(Error::SingularSystem {
                    coords: offending_coordinates(a),
                })
            }
        }
        None => Err(Error::SingularSystem {
            coords: offending_coordinates(a),
        }),
    }
}

/// As [`spd_solve`], retrying once with `1e-10 * trace` added to the diagonal.
pub fn spd_solve_jittered(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    spd_solve(a, b).or_else(|_| {
        let jitter = 1e-10 * a.trace().abs().max(f64::MIN_POSITIVE);
        let mut aj = a.clone();
        for j in 0..aj.nrows() {
            aj[(j, j)] += jitter;
        }
        spd_solve(&aj, b)
    })
}

/// General square solve by LU with partial pivoting.
pub fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::SingularSystem {
            coords: offending_coordinates(a),
        })
}

/// Greedy scan for coordinates whose column adds no new direction to the
/// ones before it.
pub fn offending_coordinates(a: &DMatrix<f64>) -> Vec<usize> {
    let p = a.nrows();
    let scale = (0..p).map(|j| a[(j, j)].abs()).fold(0.0, f64::max);
    let mut kept: Vec<usize> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..p {
        if !(a[(j, j)] > 1e-14 * scale) || !a[(j, j)].is_finite() {
            bad.push(j);
            continue;
        }
        kept.push(j);
        let sub = a.select_rows(kept.iter()).select_columns(kept.iter());
        let ok = Cholesky::new(sub.clone()).is_some_and(|c| {
            let d = c.l().diagonal();
            let (min, max) = d.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
                (lo.min(v.abs()), hi.max(v.abs()))
            });
            min > 1e-7 * max
        });
        if !ok {
            kept.pop();
            bad.push(j);
        }
    }
    bad
}

/// Rows of `x` restricted to the listed columns.
pub fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    x.select_columns(cols.iter())
}

pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |m, (u, v)| m.max((u - v).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_duplicate_column() {
        let x = DMatrix::from_row_slice(4, 3, &[1., 2., 2., 0., 1., 1., 3., 1., 1., 1., 0., 0.]);
        let gram = x.tr_mul(&x);
        let err = spd_solve(&gram, &DVector::from_element(3, 1.0)).unwrap_err();
        match err {
            Error::SingularSystem { coords } => assert_eq!(coords, vec![2]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn weighted_gram_matches_explicit() {
        let x = DMatrix::from_row_slice(3, 2, &[1., 2., 3., 4., 5., 6.]);
        let w = DVector::from_vec(vec![0.5, 2.0, 1.0]);
        let explicit = x.transpose() * DMatrix::from_diagonal(&w) * &x;
        assert!((weighted_gram(&x, &w) - explicit).abs().max() < 1e-12);
    }
}
