//! Majority-vote pseudo labeling of an unlabeled target domain.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{Classifier, ClassifierConfig};
use crate::data::{Domain, FeatureMatrix, Label, RESIDUAL};
use crate::error::{Error, Result};

/// Split of target rows into pseudo-labeled candidates and residuals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoLabeling {
    pub candidate_indices: Vec<usize>,
    pub candidate_labels: Vec<Label>,
    pub residual_indices: Vec<usize>,
}

impl PseudoLabeling {
    pub fn n_rows(&self) -> usize {
        self.candidate_indices.len() + self.residual_indices.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.candidate_indices.len()
    }

    /// True when candidates and residuals partition `0..n` and the label
    /// vector matches the candidate list.
    pub fn is_partition(&self, n: usize) -> bool {
        if self.candidate_labels.len() != self.candidate_indices.len() || self.n_rows() != n {
            return false;
        }
        let mut seen = vec![false; n];
        for &i in self.candidate_indices.iter().chain(&self.residual_indices) {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        true
    }

    /// One label per target row, residuals carrying the sentinel.
    pub fn dense_labels(&self) -> Vec<Label> {
        let mut out = vec![RESIDUAL; self.n_rows()];
        for (&i, &l) in self.candidate_indices.iter().zip(&self.candidate_labels) {
            out[i] = l;
        }
        out
    }

    fn from_dense(labels: &[Label]) -> Self {
        let mut out = PseudoLabeling {
            candidate_indices: Vec::new(),
            candidate_labels: Vec::new(),
            residual_indices: Vec::new(),
        };
        for (i, &l) in labels.iter().enumerate() {
            if l == RESIDUAL {
                out.residual_indices.push(i);
            } else {
                out.candidate_indices.push(i);
                out.candidate_labels.push(l);
            }
        }
        out
    }
}

/// Fits every configured learner on all of the labeled source rows.
pub fn fit_ensemble(source: &Domain, configs: &[ClassifierConfig]) -> Result<Vec<Classifier>> {
    if configs.is_empty() {
        return Err(Error::EmptyInput("classifier configs"));
    }
    let labels = source.labels()?;
    configs
        .par_iter()
        .map(|cfg| Classifier::fit(cfg, &source.features, labels))
        .collect()
}

/// Strict plurality per row over the given prediction vectors; rows without
/// a strict winner become residuals.
pub fn vote(predictions: &[Vec<Label>]) -> Result<PseudoLabeling> {
    if predictions.len() < 2 {
        return Err(Error::InvalidArgument("majority voting needs at least 2 classifiers".into()));
    }
    let n = predictions[0].len();
    if n == 0 {
        return Err(Error::EmptyInput("target rows"));
    }
    if let Some(p) = predictions.iter().find(|p| p.len() != n) {
        return Err(Error::LengthMismatch { left: n, right: p.len() });
    }
    let dense: Vec<Label> = (0..n)
        .map(|j| {
            let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
            for p in predictions {
                *counts.entry(p[j]).or_default() += 1;
            }
            let top = counts.values().copied().max().unwrap_or(0);
            let mut winners = counts.iter().filter(|(_, &c)| c == top);
            match (winners.next(), winners.next()) {
                (Some((&l, _)), None) => l,
                _ => RESIDUAL,
            }
        })
        .collect();
    Ok(PseudoLabeling::from_dense(&dense))
}

pub fn majority_vote(classifiers: &[Classifier], target: &FeatureMatrix) -> Result<PseudoLabeling> {
    if classifiers.len() < 2 {
        return Err(Error::InvalidArgument("majority voting needs at least 2 classifiers".into()));
    }
    if target.is_empty() {
        return Err(Error::EmptyInput("target rows"));
    }
    let predictions = classifiers
        .iter()
        .map(|c| c.predict(target))
        .collect::<Result<Vec<_>>>()?;
    vote(&predictions)
}

/// Replaces an empty candidate set with `best`'s labels for every row.
pub fn fallback_if_empty(
    labeling: PseudoLabeling,
    best: &Classifier,
    target: &FeatureMatrix,
) -> Result<PseudoLabeling> {
    if labeling.num_candidates() > 0 {
        return Ok(labeling);
    }
    log::warn!("majority voting produced no candidates; falling back to a single classifier");
    let labels = best.predict(target)?;
    Ok(PseudoLabeling {
        candidate_indices: (0..labels.len()).collect(),
        candidate_labels: labels,
        residual_indices: Vec::new(),
    })
}

/// Index of the classifier with the highest training accuracy (first on ties).
pub fn best_classifier(classifiers: &[Classifier], source: &Domain) -> Result<usize> {
    let truth = source.labels()?;
    let mut best = (0, -1.0);
    for (k, c) in classifiers.iter().enumerate() {
        let pred = c.predict(&source.features)?;
        let acc = pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64;
        if acc > best.1 {
            best = (k, acc);
        }
    }
    Ok(best.0)
}

/// Fit, vote and fall back in one step.
pub fn pseudo_label(source: &Domain, target: &FeatureMatrix, configs: &[ClassifierConfig]) -> Result<PseudoLabeling> {
    let ensemble = fit_ensemble(source, configs)?;
    let labeling = majority_vote(&ensemble, target)?;
    if labeling.num_candidates() > 0 {
        return Ok(labeling);
    }
    let best = best_classifier(&ensemble, source)?;
    fallback_if_empty(labeling, &ensemble[best], target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plurality_and_ties() {
        let p = vote(&[vec![1, 1, 2], vec![1, 2, 2], vec![2, 3, 2]]).unwrap();
        assert_eq!(p.dense_labels(), vec![1, -1, 2]);
        assert_eq!(p.candidate_indices, vec![0, 2]);
        assert_eq!(p.residual_indices, vec![1]);
        assert!(p.is_partition(3));
    }

    #[test]
    fn two_way_split_is_residual() {
        let p = vote(&[vec![1, 4], vec![2, 4]]).unwrap();
        assert_eq!(p.dense_labels(), vec![-1, 4]);
    }

    #[test]
    fn order_free() {
        let a = vec![1, 2, 3, 3];
        let b = vec![1, 3, 3, 2];
        let c = vec![2, 2, 1, 2];
        let x = vote(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let y = vote(&[c, a, b]).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn errors() {
        assert!(vote(&[vec![1]]).is_err());
        assert!(matches!(vote(&[vec![], vec![]]), Err(Error::EmptyInput(_))));
        assert!(vote(&[vec![1, 2], vec![1]]).is_err());
    }

    #[test]
    fn fallback() {
        let rows = FeatureMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let constant = Classifier::fit(&ClassifierConfig::knn(3), &rows, &[2, 2, 2]).unwrap();
        let empty = PseudoLabeling::from_dense(&[-1, -1, -1]);
        let filled = fallback_if_empty(empty, &constant, &rows).unwrap();
        assert_eq!(filled.candidate_labels, vec![2, 2, 2]);
        assert!(filled.residual_indices.is_empty());

        let some = PseudoLabeling::from_dense(&[1, -1, 3]);
        assert_eq!(fallback_if_empty(some.clone(), &constant, &rows).unwrap(), some);
    }
}
