//! Dense symmetric-definite generalized eigenproblems `A w = μ B w`.

use faer::{Mat, Side};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Eigenpairs sorted by ascending eigenvalue, B-orthonormal columns.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Flips each column so its largest-magnitude entry is positive (first such
/// entry on ties).
pub fn fix_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if !col.is_empty() && col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Lower Cholesky factor, `None` unless the matrix is positive definite.
fn cholesky(m: &Mat<f64>) -> Option<Mat<f64>> {
    m.llt(Side::Lower).ok().map(|c| c.L().to_owned())
}

/// `L⁻¹ S L⁻ᵀ` for symmetric `S`.
fn congruence(l: &Mat<f64>, s: &Mat<f64>) -> Mat<f64> {
    let mut x = s.clone();
    l.solve_lower_triangular_in_place(&mut x);
    let mut y = x.transpose().to_owned();
    l.solve_lower_triangular_in_place(&mut y);
    let yt = y.transpose().to_owned();
    Mat::from_fn(y.nrows(), y.ncols(), |i, j| 0.5 * (y[(i, j)] + yt[(i, j)]))
}

/// Columns `L⁻ᵀ y_k` for the selected eigenvector columns, each scaled.
fn back_substitute(l: &Mat<f64>, y: &Mat<f64>, picks: &[(usize, f64)]) -> DMatrix<f64> {
    let mut x = Mat::from_fn(y.nrows(), picks.len(), |i, c| y[(i, picks[c].0)] * picks[c].1);
    l.transpose().solve_upper_triangular_in_place(&mut x);
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)])
}

/// Symmetric eigendecomposition with ascending eigenvalues.
fn sorted_eigen(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = m.nrows();
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::IllConditioned(format!("symmetric eigensolver did not converge: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[i].total_cmp(&s[j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| s[i]).collect();
    let vectors = Mat::from_fn(n, n, |r, c| u[(r, order[c])]);
    Ok((values, vectors))
}

/// The `m` smallest eigenpairs of the symmetric pencil `(A, B)`, normalized so
/// that `wᵀ B w = 1`.
///
/// When `A` is positive definite the pencil is reduced through the Cholesky
/// factor of `A`, i.e. the largest eigenvalues of `B w = ν A w` are taken and
/// inverted. This keeps the wanted end of the spectrum well resolved even when
/// `B` is nearly singular. Otherwise `B` itself is factored; if that fails the
/// error lists the jitter values tried.
pub fn smallest_generalized_eigenpairs(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    m: usize,
) -> Result<GeneralizedEigen> {
    let n = a.nrows();
    if a.shape() != (n, n) || b.shape() != (n, n) {
        return Err(Error::InvalidArgument("pencil matrices must be square and equal-sized".into()));
    }
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "requested {m} eigenpairs from a {n}x{n} pencil"
        )));
    }
    let a = to_faer(&symmetrize(a));
    let b = to_faer(&symmetrize(b));

    let mut out = if let Some(l) = cholesky(&a) {
        let (nu, y) = sorted_eigen(&congruence(&l, &b))?;
        let mut values = Vec::with_capacity(m);
        let mut picks = Vec::with_capacity(m);
        for k in (n - m..n).rev() {
            let v = nu[k];
            if v.is_nan() || v <= f64::MIN_POSITIVE {
                return Err(Error::IllConditioned(format!(
                    "B is singular on the requested subspace (eigenvalue {v:e} of B relative to A)"
                )));
            }
            values.push(1.0 / v);
            picks.push((k, 1.0 / v.sqrt()));
        }
        GeneralizedEigen {
            values,
            vectors: back_substitute(&l, &y, &picks),
        }
    } else {
        let scale = ((0..n).map(|i| b[(i, i)]).sum::<f64>() / n as f64).abs();
        let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
        let mut tried = Vec::new();
        let mut found = None;
        for jitter in [0.0, 1e-9 * scale, 1e-6 * scale] {
            tried.push(jitter);
            let shifted = Mat::from_fn(n, n, |i, j| b[(i, j)] + if i == j { jitter } else { 0.0 });
            if let Some(l) = cholesky(&shifted) {
                let min_diag = (0..n).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
                if min_diag * min_diag >= floor {
                    found = Some(l);
                    break;
                }
            }
        }
        let l = found.ok_or_else(|| {
            Error::IllConditioned(format!(
                "A is not positive definite and B stays singular after jitter path {tried:?}"
            ))
        })?;
        let (mu, y) = sorted_eigen(&congruence(&l, &a))?;
        let picks: Vec<(usize, f64)> = (0..m).map(|k| (k, 1.0)).collect();
        GeneralizedEigen {
            values: mu[..m].to_vec(),
            vectors: back_substitute(&l, &y, &picks),
        }
    };
    fix_column_signs(&mut out.vectors);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let g = DMatrix::from_fn(n, n, |_, _| next());
        &g * g.transpose() + DMatrix::identity(n, n) * 0.1
    }

    fn check(a: &DMatrix<f64>, b: &DMatrix<f64>, eig: &GeneralizedEigen) {
        for (k, &mu) in eig.values.iter().enumerate() {
            let w = eig.vectors.column(k);
            let aw = a * w;
            let bw = b * w;
            let res = (&aw - &bw * mu).norm();
            assert!(res <= 1e-9 * aw.norm().max(bw.norm()), "residual {res}");
            assert!(((w.transpose() * &bw)[0] - 1.0).abs() < 1e-9);
        }
        assert!(eig.values.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn both_reduction_paths_agree() {
        let a = spd(6, 1);
        let b = spd(6, 2);
        let via_a = smallest_generalized_eigenpairs(&a, &b, 3).unwrap();
        check(&a, &b, &via_a);

        // a rank-one A forces the B-factor path
        let v = DVector::from_fn(6, |i, _| i as f64 + 1.0);
        let singular = &v * v.transpose() * 2.0 / v.norm_squared();
        let via_b = smallest_generalized_eigenpairs(&singular, &b, 3).unwrap();
        check(&singular, &b, &via_b);
        assert!(via_b.values[0].abs() < 1e-9);

        let full = smallest_generalized_eigenpairs(&a, &b, 6).unwrap();
        for (x, y) in via_a.values.iter().zip(&full.values) {
            assert!((x - y).abs() < 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn identity_pencil() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let b = DMatrix::identity(3, 3);
        let eig = smallest_generalized_eigenpairs(&a, &b, 2).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-12);
        assert!((eig.values[1] - 2.0).abs() < 1e-12);
        assert!((eig.vectors[(1, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_pencil_is_reported() {
        let a = DMatrix::zeros(3, 3);
        let b = DMatrix::zeros(3, 3);
        assert!(matches!(
            smallest_generalized_eigenpairs(&a, &b, 1),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn sign_convention() {
        let mut m = DMatrix::from_column_slice(3, 2, &[0.1, -0.9, 0.2, 0.5, 0.1, -0.2]);
        fix_column_signs(&mut m);
        assert_eq!(m[(1, 0)], 0.9);
        assert_eq!(m[(0, 1)], 0.5);
    }
}
