//! PCA and TCA comparison transforms.

use nalgebra::{DMatrix, SymmetricEigen};
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::kernel::gram;
use crate::linalg::fix_column_signs;
use crate::sat::{solve_pencil, SatConfig, TransferModel};

/// Principal directions of a fitted sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `d × m`, one unit direction per column.
    pub components: DMatrix<f64>,
    /// Sample variance (divisor `n - 1`) along each direction, descending.
    pub variances: Vec<f64>,
}

impl Pca {
    pub fn fit(rows: &FeatureMatrix, m: usize) -> Result<Self> {
        let d = rows.n_cols();
        if m == 0 || m > d {
            return Err(Error::InvalidArgument(format!("pca dims {m} must lie in 1..={d}")));
        }
        if rows.n_rows() < 2 {
            return Err(Error::EmptyInput("pca needs at least two rows"));
        }
        let mean = rows.column_means();
        let mut x = rows.to_dmatrix();
        for mut r in x.row_iter_mut() {
            for (v, mu) in r.iter_mut().zip(&mean) {
                *v -= mu;
            }
        }
        let cov = crate::linalg::symmetrize(&(x.transpose() * &x / (rows.n_rows() - 1) as f64));
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
        order.truncate(m);
        let mut components = DMatrix::from_columns(
            &order
                .iter()
                .map(|&i| eig.eigenvectors.column(i).into_owned())
                .collect::<Vec<_>>(),
        );
        fix_column_signs(&mut components);
        Ok(Self {
            mean,
            variances: order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect(),
            components,
        })
    }

    pub fn transform(&self, rows: &FeatureMatrix) -> Result<FeatureMatrix> {
        if rows.n_cols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: rows.n_cols(),
            });
        }
        if rows.is_empty() {
            return Ok(FeatureMatrix::empty(self.components.ncols()));
        }
        let mut x = rows.to_dmatrix();
        for mut r in x.row_iter_mut() {
            for (v, mu) in r.iter_mut().zip(&self.mean) {
                *v -= mu;
            }
        }
        FeatureMatrix::from_dmatrix(&(x * &self.components))
    }
}

/// Fits PCA on `fit_rows` and projects `apply_rows`.
pub fn pca_transform(fit_rows: &FeatureMatrix, apply_rows: &FeatureMatrix, m: usize) -> Result<FeatureMatrix> {
    Pca::fit(fit_rows, m)?.transform(apply_rows)
}

/// Single MMD coefficient matrix over all source and target rows.
pub fn global_mmd_matrix(num_source: usize, num_target: usize) -> DMatrix<f64> {
    let n = num_source + num_target;
    let (ss, tt) = ((num_source * num_source) as f64, (num_target * num_target) as f64);
    let st = (num_source * num_target) as f64;
    DMatrix::from_fn(n, n, |i, j| match (i < num_source, j < num_source) {
        (true, true) => 1.0 / ss,
        (false, false) => 1.0 / tt,
        _ => -1.0 / st,
    })
}

/// Transfer component analysis: the same pencil as the stratified solver with
/// one class spanning every row.
pub fn tca_transform(source: &FeatureMatrix, target: &FeatureMatrix, cfg: &SatConfig) -> Result<TransferModel> {
    cfg.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyInput("tca domains"));
    }
    let train_rows = source.vstack(target)?;
    let n = train_rows.n_rows();
    if cfg.num_dims + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "num_dims {} exceeds n_s + n_t - 1 = {}",
            cfg.num_dims,
            n - 1
        )));
    }
    let kernel = cfg.kernel.resolve(&[&train_rows])?;
    let k = gram(&train_rows, &kernel);
    let l = global_mmd_matrix(source.n_rows(), target.n_rows());
    let kmk = crate::linalg::symmetrize(&(&k * l * &k));
    let (w, eigenvalues) = solve_pencil(&k, kmk, cfg.lambda, cfg.num_dims)?;
    Ok(TransferModel {
        w,
        kernel,
        train_rows,
        num_source: source.n_rows(),
        class_ids: Vec::new(),
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Kernel, KernelSpec};

    #[test]
    fn full_rank_pca_is_a_rotation() {
        let rows = FeatureMatrix::from_rows(&[[1.0, 2.0, 0.5], [0.0, -1.0, 2.0], [3.0, 1.0, 1.0], [2.0, 2.5, -1.0]]).unwrap();
        let z = pca_transform(&rows, &rows, 3).unwrap();
        let dist = |m: &FeatureMatrix, i: usize, j: usize| -> f64 {
            m.row(i).iter().zip(m.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        };
        for i in 0..4 {
            for j in 0..4 {
                assert!((dist(&rows, i, j) - dist(&z, i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rank_one_data() {
        let rows = FeatureMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [-1.0, -2.0]]).unwrap();
        let pca = Pca::fit(&rows, 2).unwrap();
        assert!(pca.variances[1].abs() < 1e-12);
        assert!(pca.variances[0] > 1.0);
        assert!(Pca::fit(&rows, 3).is_err());
    }

    #[test]
    fn global_matrix_blocks() {
        let l = global_mmd_matrix(2, 1);
        assert_eq!(l[(0, 1)], 0.25);
        assert_eq!(l[(2, 2)], 1.0);
        assert_eq!(l[(0, 2)], -0.5);
        for i in 0..3 {
            assert!(l.row(i).sum().abs() < 1e-15);
        }
    }

    #[test]
    fn identical_domains_have_zero_trace() {
        let s = FeatureMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]).unwrap();
        let k = gram(&s.vstack(&s).unwrap(), &Kernel::Linear);
        let l = global_mmd_matrix(3, 3);
        assert!((&k * l).trace().abs() < 1e-12);
        let cfg = SatConfig {
            num_dims: 2,
            kernel: KernelSpec::rbf(1.0),
            ..SatConfig::default()
        };
        let model = tca_transform(&s, &s, &cfg).unwrap();
        assert_eq!(model.w.ncols(), 2);
    }
}
