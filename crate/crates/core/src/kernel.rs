//! Kernels, kernel matrices and maximum mean discrepancy.
//!
//! The global distance compares two whole sample sets; the stratified
//! distance averages the per-class distance over the classes both sets share.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{class_indices, Domain, FeatureMatrix, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    Fixed(f64),
    MedianHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Only read for [`KernelKind::Rbf`].
    pub bandwidth: Bandwidth,
}

impl KernelSpec {
    pub fn linear() -> Self {
        Self {
            kind: KernelKind::Linear,
            bandwidth: Bandwidth::MedianHeuristic,
        }
    }

    pub fn rbf(sigma: f64) -> Self {
        Self {
            kind: KernelKind::Rbf,
            bandwidth: Bandwidth::Fixed(sigma),
        }
    }

    pub fn rbf_median() -> Self {
        Self {
            kind: KernelKind::Rbf,
            bandwidth: Bandwidth::MedianHeuristic,
        }
    }

    /// Resolves the bandwidth, using `sample` for the median heuristic.
    pub fn resolve(&self, sample: &[&FeatureMatrix]) -> Result<Kernel> {
        match (self.kind, self.bandwidth) {
            (KernelKind::Linear, _) => Ok(Kernel::Linear),
            (KernelKind::Rbf, Bandwidth::Fixed(sigma)) => Kernel::rbf(sigma),
            (KernelKind::Rbf, Bandwidth::MedianHeuristic) => {
                Kernel::rbf(median_pairwise_distance(sample)?)
            }
        }
    }
}

/// A kernel with every parameter fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    Linear,
    Rbf { sigma: f64 },
}

impl Kernel {
    pub fn rbf(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Kernel::Rbf { sigma })
        } else {
            Err(Error::InvalidArgument(format!(
                "rbf bandwidth must be positive, got {sigma}"
            )))
        }
    }

    /// Evaluates the kernel; callers guarantee equal lengths.
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { sigma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-sq / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    pub fn spec(&self) -> KernelSpec {
        match *self {
            Kernel::Linear => KernelSpec::linear(),
            Kernel::Rbf { sigma } => KernelSpec::rbf(sigma),
        }
    }
}

/// Kernel value of two vectors. A median-heuristic bandwidth is resolved over
/// the pair itself.
pub fn kernel_value(a: &[f64], b: &[f64], spec: &KernelSpec) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("kernel inputs must be finite".into()));
    }
    let pair = FeatureMatrix::from_rows(&[a, b])?;
    Ok(spec.resolve(&[&pair])?.eval(a, b))
}

/// Median of all non-zero pairwise Euclidean distances over the union of
/// the given matrices.
pub fn median_pairwise_distance(sample: &[&FeatureMatrix]) -> Result<f64> {
    let rows: Vec<&[f64]> = sample.iter().flat_map(|m| m.rows()).collect();
    let mut dists: Vec<f64> = (0..rows.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows = &rows;
            (i + 1..rows.len()).map(move |j| {
                rows[i]
                    .iter()
                    .zip(rows[j])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
        })
        .filter(|&d| d > 0.0)
        .collect();
    if dists.is_empty() {
        return Err(Error::DegenerateBandwidth);
    }
    let len = dists.len();
    let mid = len / 2;
    let (lower, upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if len % 2 == 1 {
        Ok(upper)
    } else {
        let lower = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(0.5 * (lower + upper))
    }
}

/// Symmetric kernel matrix over stacked `[source; target]` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub values: DMatrix<f64>,
    pub block_sizes: (usize, usize),
    pub kernel: Kernel,
}

/// Gram matrix of `rows` under a resolved kernel. Only the upper triangle is
/// evaluated, so the result is exactly symmetric.
pub fn gram(rows: &FeatureMatrix, kernel: &Kernel) -> DMatrix<f64> {
    let n = rows.n_rows();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = rows.row(i);
            (i..n).map(|j| kernel.eval(a, rows.row(j))).collect()
        })
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            k[(i, i + off)] = v;
            k[(i + off, i)] = v;
        }
    }
    k
}

/// Cross-kernel block `k(a_i, b_j)`.
pub fn cross_gram(a: &FeatureMatrix, b: &FeatureMatrix, kernel: &Kernel) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..a.n_rows())
        .into_par_iter()
        .map(|i| b.rows().map(|r| kernel.eval(a.row(i), r)).collect())
        .collect();
    DMatrix::from_fn(a.n_rows(), b.n_rows(), |i, j| rows[i][j])
}

pub fn kernel_matrix(source: &FeatureMatrix, target: &FeatureMatrix, spec: &KernelSpec) -> Result<KernelMatrix> {
    let union = source.vstack(target)?;
    let kernel = spec.resolve(&[&union])?;
    Ok(KernelMatrix {
        values: gram(&union, &kernel),
        block_sizes: (source.n_rows(), target.n_rows()),
        kernel,
    })
}

/// `I - (1/n) 1 1ᵀ`.
pub fn centering_matrix(n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("centering matrix needs n >= 1".into()));
    }
    let off = 1.0 / n as f64;
    Ok(DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - off } else { -off }))
}

fn mean_kernel(a: &FeatureMatrix, b: &FeatureMatrix, kernel: &Kernel) -> f64 {
    // per-row sums are reduced sequentially so the result does not depend
    // on the thread count
    let row_sums: Vec<f64> = (0..a.n_rows())
        .into_par_iter()
        .map(|i| {
            let x = a.row(i);
            b.rows().map(|y| kernel.eval(x, y)).sum::<f64>()
        })
        .collect();
    row_sums.iter().sum::<f64>() / (a.n_rows() as f64 * b.n_rows() as f64)
}

/// Squared MMD between two sample sets under an already resolved kernel.
pub fn mmd_with_kernel(source: &FeatureMatrix, target: &FeatureMatrix, kernel: &Kernel) -> Result<f64> {
    if source.is_empty() {
        return Err(Error::EmptyInput("source sample"));
    }
    if target.is_empty() {
        return Err(Error::EmptyInput("target sample"));
    }
    if source.n_cols() != target.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: source.n_cols(),
            got: target.n_cols(),
        });
    }
    let d = mean_kernel(source, source, kernel) + mean_kernel(target, target, kernel)
        - 2.0 * mean_kernel(source, target, kernel);
    Ok(d.max(0.0))
}

/// Squared empirical MMD over whole sample sets, clamped at zero.
pub fn mmd_global(source: &FeatureMatrix, target: &FeatureMatrix, spec: &KernelSpec) -> Result<f64> {
    if source.n_cols() != target.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: source.n_cols(),
            got: target.n_cols(),
        });
    }
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyInput("mmd sample"));
    }
    let kernel = spec.resolve(&[source, target])?;
    mmd_with_kernel(source, target, &kernel)
}

/// Result of a class-wise distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedDistance {
    /// Average of the per-class distances.
    pub value: f64,
    pub per_class: Vec<(Label, f64)>,
    /// Classes present on only one side; excluded from the average.
    pub skipped_classes: Vec<Label>,
}

impl StratifiedDistance {
    /// Unaveraged sum over classes.
    pub fn sum(&self) -> f64 {
        self.per_class.iter().map(|(_, d)| d).sum()
    }
}

/// Stratified distance under an already resolved kernel.
pub fn mmd_stratified_with_kernel(
    source: &FeatureMatrix,
    source_labels: &[Label],
    target: &FeatureMatrix,
    target_labels: &[Label],
    kernel: &Kernel,
) -> Result<StratifiedDistance> {
    if source_labels.len() != source.n_rows() {
        return Err(Error::LengthMismatch {
            left: source_labels.len(),
            right: source.n_rows(),
        });
    }
    if target_labels.len() != target.n_rows() {
        return Err(Error::LengthMismatch {
            left: target_labels.len(),
            right: target.n_rows(),
        });
    }
    let s_groups = class_indices(source_labels);
    let t_groups = class_indices(target_labels);
    let all: BTreeSet<Label> = s_groups.keys().chain(t_groups.keys()).copied().collect();
    let mut per_class = Vec::new();
    let mut skipped_classes = Vec::new();
    for c in all {
        match (s_groups.get(&c), t_groups.get(&c)) {
            (Some(si), Some(ti)) => {
                let d = mmd_with_kernel(&source.select_rows(si), &target.select_rows(ti), kernel)?;
                per_class.push((c, d));
            }
            _ => skipped_classes.push(c),
        }
    }
    if per_class.is_empty() {
        return Err(Error::NoCommonClass);
    }
    if !skipped_classes.is_empty() {
        log::warn!("classes {skipped_classes:?} present in only one domain; excluded from the stratified distance");
    }
    let value = per_class.iter().map(|(_, d)| d).sum::<f64>() / per_class.len() as f64;
    Ok(StratifiedDistance {
        value,
        per_class,
        skipped_classes,
    })
}

/// Per-class MMD averaged over the classes present in both labeled domains.
pub fn mmd_stratified(source: &Domain, target: &Domain, spec: &KernelSpec) -> Result<StratifiedDistance> {
    let kernel = spec.resolve(&[&source.features, &target.features])?;
    mmd_stratified_with_kernel(
        &source.features,
        source.labels()?,
        &target.features,
        target.labels()?,
        &kernel,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn kernel_value_cases() {
        let x = [0.3, -1.2];
        assert_eq!(kernel_value(&x, &x, &KernelSpec::rbf(0.7)).unwrap(), 1.0);
        let v = kernel_value(&[0.0], &[2.0], &KernelSpec::rbf(2f64.sqrt())).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-12);
        assert_eq!(kernel_value(&[1.0, 2.0], &[3.0, 4.0], &KernelSpec::linear()).unwrap(), 11.0);
        assert!(matches!(
            kernel_value(&[1.0], &[1.0, 2.0], &KernelSpec::linear()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kernel_matrix_shape_and_blocks() {
        let s = fm(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let t = fm(&[&[1.0, 1.0], &[2.0, 0.0], &[0.0, 3.0]]);
        let k = kernel_matrix(&s, &t, &KernelSpec::rbf(1.0)).unwrap();
        assert_eq!(k.values.shape(), (5, 5));
        assert_eq!(k.block_sizes, (2, 3));
        assert_eq!(k.values, k.values.transpose());
        assert!(k.values.iter().all(|&v| v > 0.0 && v <= 1.0));
        assert!((0..5).all(|i| k.values[(i, i)] == 1.0));
    }

    #[test]
    fn linear_kernel_orthonormal_rows() {
        let s = fm(&[&[1.0, 0.0, 0.0]]);
        let t = fm(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let k = kernel_matrix(&s, &t, &KernelSpec::linear()).unwrap();
        assert_eq!(k.values, DMatrix::identity(3, 3));
    }

    #[test]
    fn median_heuristic_regular_simplex() {
        // 4 points at mutual distance 1: a regular tetrahedron
        let h = 1.0 / 2f64.sqrt();
        let s = fm(&[&[h, 0.0, 0.0, 0.0], &[0.0, h, 0.0, 0.0]]);
        let t = fm(&[&[0.0, 0.0, h, 0.0], &[0.0, 0.0, 0.0, h]]);
        let k = kernel_matrix(&s, &t, &KernelSpec::rbf_median()).unwrap();
        match k.kernel {
            Kernel::Rbf { sigma } => assert!((sigma - 1.0).abs() < 1e-12),
            _ => unreachable!(),
        }
        assert!((k.values[(0, 3)] - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn median_heuristic_degenerate() {
        let s = fm(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(
            kernel_matrix(&s, &s, &KernelSpec::rbf_median()),
            Err(Error::DegenerateBandwidth)
        ));
    }

    #[test]
    fn centering_matrix_properties() {
        let h2 = centering_matrix(2).unwrap();
        assert_eq!(h2, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
        let h5 = centering_matrix(5).unwrap();
        let ones = DMatrix::from_element(5, 1, 1.0);
        assert!((&h5 * ones).amax() < 1e-15);
        let h7 = centering_matrix(7).unwrap();
        assert!((&h7 * &h7 - &h7).amax() < 1e-12);
        assert!(centering_matrix(0).is_err());
    }

    #[test]
    fn mmd_global_cases() {
        let a = fm(&[&[0.0, 1.0], &[2.0, 3.0]]);
        assert!(mmd_global(&a, &a, &KernelSpec::rbf(1.0)).unwrap() < 1e-12);
        let s = fm(&[&[0.0, 0.0]]);
        let t = fm(&[&[1.0, 1.0]]);
        assert!((mmd_global(&s, &t, &KernelSpec::linear()).unwrap() - 2.0).abs() < 1e-12);
        assert!(mmd_global(&FeatureMatrix::empty(2), &t, &KernelSpec::linear()).is_err());
    }

    #[test]
    fn mmd_stratified_cases() {
        let src = Domain::labeled(fm(&[&[0.0, 0.0], &[5.0, 5.0]]), vec![1, 2]).unwrap();
        let same = mmd_stratified(&src, &src, &KernelSpec::linear()).unwrap();
        assert!(same.value < 1e-12);

        let tgt = Domain::labeled(fm(&[&[0.0, 0.0], &[6.0, 6.0]]), vec![1, 2]).unwrap();
        let d = mmd_stratified(&src, &tgt, &KernelSpec::linear()).unwrap();
        assert!((d.value - 1.0).abs() < 1e-12);
        assert!((d.sum() - 2.0).abs() < 1e-12);

        let other = Domain::labeled(fm(&[&[0.0, 0.0]]), vec![3]).unwrap();
        assert!(matches!(
            mmd_stratified(&src, &other, &KernelSpec::linear()),
            Err(Error::NoCommonClass)
        ));

        let partial = Domain::labeled(fm(&[&[0.0, 0.0]]), vec![1]).unwrap();
        let d = mmd_stratified(&src, &partial, &KernelSpec::linear()).unwrap();
        assert_eq!(d.skipped_classes, vec![2]);
        assert_eq!(d.per_class.len(), 1);
    }
}
