//! Domains, recordings and feature matrices.
//!
//! Class labels are 1-based integers. The value [`RESIDUAL`] marks a target
//! row that received no pseudo label.

mod io;
mod synthetic;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    load_feature_matrix, load_labels, load_recording, load_recording_at_rate, read_feature_matrix,
    read_recording, save_feature_matrix, save_labels, save_recording, write_feature_matrix,
};
pub use synthetic::{generate_synthetic, SyntheticSpec};

/// Class identifier. Valid classes are `1..=C`.
pub type Label = i32;

/// Sentinel assigned to target rows without a reliable pseudo label.
pub const RESIDUAL: Label = -1;

/// Dense row-major matrix of finite features; one row per window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::InvalidArgument("feature matrix needs at least one column".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// An empty matrix with `cols` columns.
    pub fn empty(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &FeatureMatrix) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.cols,
            });
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter().copied());
        }
        Self::new(m.nrows(), m.ncols(), data)
    }

    /// Per-column means.
    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for r in self.rows() {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        if self.rows > 0 {
            means.iter_mut().for_each(|m| *m /= self.rows as f64);
        }
        means
    }
}

/// Sensor stream of one body position with per-sample labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub sample_rate: f64,
    pub channel_names: Vec<String>,
    pub channels: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub position_id: String,
    pub dataset_id: String,
}

impl RawRecording {
    pub fn new(
        sample_rate: f64,
        channel_names: Vec<String>,
        channels: Vec<Vec<f64>>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if channel_names.len() != channels.len() {
            return Err(Error::LengthMismatch {
                left: channel_names.len(),
                right: channels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::EmptyInput("recording"));
        }
        for ch in &channels {
            if ch.len() != labels.len() {
                return Err(Error::LengthMismatch {
                    left: ch.len(),
                    right: labels.len(),
                });
            }
        }
        Ok(Self {
            sample_rate,
            channel_names,
            channels,
            labels,
            position_id: String::new(),
            dataset_id: String::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Feature matrix with optional labels and identity metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub features: FeatureMatrix,
    pub labels: Option<Vec<Label>>,
    pub position_id: String,
    pub dataset_id: String,
}

impl Domain {
    pub fn new(features: FeatureMatrix, labels: Option<Vec<Label>>) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != features.n_rows() {
                return Err(Error::LengthMismatch {
                    left: labels.len(),
                    right: features.n_rows(),
                });
            }
            if let Some(&bad) = labels.iter().find(|&&l| l < 1) {
                return Err(Error::InvalidLabel(bad));
            }
        }
        Ok(Self {
            features,
            labels,
            position_id: String::new(),
            dataset_id: String::new(),
        })
    }

    pub fn labeled(features: FeatureMatrix, labels: Vec<Label>) -> Result<Self> {
        Self::new(features, Some(labels))
    }

    pub fn unlabeled(features: FeatureMatrix) -> Self {
        Self {
            features,
            labels: None,
            position_id: String::new(),
            dataset_id: String::new(),
        }
    }

    pub fn with_ids(mut self, dataset_id: impl Into<String>, position_id: impl Into<String>) -> Self {
        self.dataset_id = dataset_id.into();
        self.position_id = position_id.into();
        self
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn dim(&self) -> usize {
        self.features.n_cols()
    }

    pub fn labels(&self) -> Result<&[Label]> {
        self.labels.as_deref().ok_or(Error::Unlabeled)
    }

    /// Checks every label against the experiment's declared class count.
    pub fn check_classes(&self, num_classes: usize) -> Result<()> {
        for &l in self.labels()? {
            if l < 1 || l as usize > num_classes {
                return Err(Error::InvalidLabel(l));
            }
        }
        Ok(())
    }

    /// A copy of this domain with its labels dropped.
    pub fn without_labels(&self) -> Domain {
        Domain {
            features: self.features.clone(),
            labels: None,
            position_id: self.position_id.clone(),
            dataset_id: self.dataset_id.clone(),
        }
    }
}

/// Row indices of each class, in ascending row order.
pub fn class_indices(labels: &[Label]) -> BTreeMap<Label, Vec<usize>> {
    let mut groups: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    groups
}

/// Splits a labeled domain into one feature matrix per class.
pub fn split_by_class(domain: &Domain) -> Result<BTreeMap<Label, FeatureMatrix>> {
    let labels = domain.labels()?;
    Ok(class_indices(labels)
        .into_iter()
        .map(|(c, idx)| (c, domain.features.select_rows(&idx)))
        .collect())
}

/// Per-dimension z-scoring with statistics taken from a reference matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Standardizer {
    /// Fits on `reference`. Zero-variance columns keep a unit scale.
    pub fn fit(reference: &FeatureMatrix) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::EmptyInput("standardizer reference"));
        }
        let means = reference.column_means();
        let mut vars = vec![0.0; reference.n_cols()];
        for r in reference.rows() {
            for ((v, x), m) in vars.iter_mut().zip(r).zip(&means) {
                *v += (x - m) * (x - m);
            }
        }
        let n = reference.n_rows() as f64;
        let scales = vars
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { means, scales })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            scales: vec![1.0; dim],
        }
    }

    pub fn transform(&self, rows: &FeatureMatrix) -> Result<FeatureMatrix> {
        if rows.n_cols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                got: rows.n_cols(),
            });
        }
        let data = rows
            .rows()
            .flat_map(|r| {
                r.iter()
                    .zip(&self.means)
                    .zip(&self.scales)
                    .map(|((x, m), s)| (x - m) / s)
            })
            .collect();
        FeatureMatrix::new(rows.n_rows(), rows.n_cols(), data)
    }

    pub fn transform_domain(&self, domain: &Domain) -> Result<Domain> {
        Ok(Domain {
            features: self.transform(&domain.features)?,
            labels: domain.labels.clone(),
            position_id: domain.position_id.clone(),
            dataset_id: domain.dataset_id.clone(),
        })
    }
}
