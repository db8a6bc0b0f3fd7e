//! Reference base learners used for pseudo labeling and as downstream
//! classifiers: k-nearest neighbours, a randomized tree ensemble and a
//! one-vs-rest linear max-margin model.

mod forest;
mod knn;
mod svm;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, Label};
use crate::error::{Error, Result};

pub use forest::RandomForest;
pub use knn::NearestNeighbors;
pub use svm::LinearSvm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassifierConfig {
    NearestNeighbors {
        k: usize,
    },
    RandomForest {
        num_trees: usize,
        max_depth: Option<usize>,
        seed: u64,
    },
    LinearSvm {
        regularization: f64,
    },
}

impl ClassifierConfig {
    pub fn knn(k: usize) -> Self {
        ClassifierConfig::NearestNeighbors { k }
    }

    pub fn forest(num_trees: usize, seed: u64) -> Self {
        ClassifierConfig::RandomForest {
            num_trees,
            max_depth: None,
            seed,
        }
    }

    pub fn svm(regularization: f64) -> Self {
        ClassifierConfig::LinearSvm { regularization }
    }

    /// kNN (k = 3), a 30-tree forest and a linear max-margin model (C = 100).
    pub fn default_ensemble(seed: u64) -> Vec<Self> {
        vec![Self::svm(100.0), Self::knn(3), Self::forest(30, seed)]
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClassifierConfig::NearestNeighbors { k: 0 } => {
                Err(Error::InvalidArgument("k must be >= 1".into()))
            }
            ClassifierConfig::RandomForest { num_trees: 0, .. } => {
                Err(Error::InvalidArgument("num_trees must be >= 1".into()))
            }
            ClassifierConfig::RandomForest {
                max_depth: Some(0), ..
            } => Err(Error::InvalidArgument("max_depth must be >= 1".into())),
            ClassifierConfig::LinearSvm { regularization }
                if !(regularization.is_finite() && regularization > 0.0) =>
            {
                Err(Error::InvalidArgument("regularization must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Same learner with its random seed replaced, if it has one.
    pub fn reseeded(&self, seed: u64) -> Self {
        match self {
            ClassifierConfig::RandomForest {
                num_trees,
                max_depth,
                ..
            } => ClassifierConfig::RandomForest {
                num_trees: *num_trees,
                max_depth: *max_depth,
                seed,
            },
            other => other.clone(),
        }
    }
}

/// A fitted, immutable base learner.
#[derive(Debug, Clone)]
pub enum Classifier {
    NearestNeighbors(NearestNeighbors),
    RandomForest(RandomForest),
    LinearSvm(LinearSvm),
}

impl Classifier {
    pub fn fit(config: &ClassifierConfig, rows: &FeatureMatrix, labels: &[Label]) -> Result<Self> {
        config.validate()?;
        if rows.is_empty() {
            return Err(Error::EmptyInput("training rows"));
        }
        if labels.len() != rows.n_rows() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: rows.n_rows(),
            });
        }
        Ok(match *config {
            ClassifierConfig::NearestNeighbors { k } => {
                Classifier::NearestNeighbors(NearestNeighbors::fit(rows, labels, k))
            }
            ClassifierConfig::RandomForest {
                num_trees,
                max_depth,
                seed,
            } => Classifier::RandomForest(RandomForest::fit(rows, labels, num_trees, max_depth, seed)),
            ClassifierConfig::LinearSvm { regularization } => {
                Classifier::LinearSvm(LinearSvm::fit(rows, labels, regularization)?)
            }
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Classifier::NearestNeighbors(m) => m.dim(),
            Classifier::RandomForest(m) => m.dim(),
            Classifier::LinearSvm(m) => m.dim(),
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> Label {
        match self {
            Classifier::NearestNeighbors(m) => m.predict_row(row),
            Classifier::RandomForest(m) => m.predict_row(row),
            Classifier::LinearSvm(m) => m.predict_row(row),
        }
    }

    pub fn predict(&self, rows: &FeatureMatrix) -> Result<Vec<Label>> {
        if rows.n_cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: rows.n_cols(),
            });
        }
        Ok((0..rows.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(rows.row(i)))
            .collect())
    }
}

/// Label with the most votes; ties go to the smallest class id.
pub(crate) fn plurality(votes: impl IntoIterator<Item = Label>) -> Label {
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for v in votes {
        *counts.entry(v).or_default() += 1;
    }
    let mut best: Option<(Label, usize)> = None;
    for (l, n) in counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((l, n));
        }
    }
    best.map(|(l, _)| l).expect("at least one vote")
}

/// Sorted distinct labels.
pub(crate) fn distinct_labels(labels: &[Label]) -> Vec<Label> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
}
