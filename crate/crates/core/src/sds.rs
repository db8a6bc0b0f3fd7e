//! Stratified source selection: rank labeled candidate sources by their
//! class-wise distance to a pseudo-labeled target.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierConfig;
use crate::data::{Domain, FeatureMatrix, Label, Standardizer};
use crate::error::{Error, Result};
use crate::kernel::{mmd_stratified_with_kernel, mmd_with_kernel, Kernel, KernelSpec};
use crate::pseudo_label::{best_classifier, fallback_if_empty, fit_ensemble, majority_vote, vote, PseudoLabeling};

/// Which classifiers pseudo-label the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VotingScope {
    /// One vote over the ensembles of every source; all sources are compared
    /// against the same candidates.
    Pooled,
    /// Each source's own ensemble labels the target for that source.
    PerSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdsConfig {
    pub kernel: KernelSpec,
    pub voting: Vec<ClassifierConfig>,
    pub scope: VotingScope,
    /// Z-score every domain with statistics of the stacked sources.
    pub standardize: bool,
}

impl Default for SdsConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::rbf_median(),
            voting: ClassifierConfig::default_ensemble(0),
            scope: VotingScope::Pooled,
            standardize: true,
        }
    }
}

/// Distances per source and the resulting order; `+∞` marks a source that
/// could not be compared.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub distances: Vec<f64>,
    /// Source indices sorted by distance, ties by index.
    pub order: Vec<usize>,
    pub selected: usize,
}

impl Ranking {
    pub fn from_distances(distances: Vec<f64>) -> Result<Self> {
        if distances.iter().all(|d| !d.is_finite()) {
            return Err(Error::NoFiniteSource);
        }
        let mut order: Vec<usize> = (0..distances.len()).collect();
        order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
        Ok(Self {
            selected: order[0],
            order,
            distances,
        })
    }

    /// 1-based rank of each source.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.order.len()];
        for (pos, &i) in self.order.iter().enumerate() {
            r[i] = pos + 1;
        }
        r
    }
}

fn check_inputs(sources: &[Domain], target: &FeatureMatrix) -> Result<()> {
    if sources.is_empty() {
        return Err(Error::EmptyInput("candidate sources"));
    }
    if target.is_empty() {
        return Err(Error::EmptyInput("target rows"));
    }
    for s in sources {
        if s.dim() != target.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: target.n_cols(),
                got: s.dim(),
            });
        }
        s.labels()?;
    }
    Ok(())
}

/// Applies the configured scaling and resolves one kernel over all rows.
fn prepare(sources: &[Domain], target: &FeatureMatrix, cfg: &SdsConfig) -> Result<(Vec<Domain>, FeatureMatrix, Kernel)> {
    let (sources, target) = if cfg.standardize {
        let mut stacked = sources[0].features.clone();
        for s in &sources[1..] {
            stacked = stacked.vstack(&s.features)?;
        }
        let z = Standardizer::fit(&stacked)?;
        (
            sources.iter().map(|s| z.transform_domain(s)).collect::<Result<Vec<_>>>()?,
            z.transform(target)?,
        )
    } else {
        (sources.to_vec(), target.clone())
    };
    let mut sample: Vec<&FeatureMatrix> = vec![&target];
    sample.extend(sources.iter().map(|s| &s.features));
    let kernel = cfg.kernel.resolve(&sample)?;
    Ok((sources, target, kernel))
}

fn label_target(sources: &[Domain], target: &FeatureMatrix, voting: &[ClassifierConfig]) -> Result<PseudoLabeling> {
    let ensembles = sources
        .iter()
        .map(|s| fit_ensemble(s, voting))
        .collect::<Result<Vec<_>>>()?;
    let predictions = ensembles
        .iter()
        .flatten()
        .map(|c| c.predict(target))
        .collect::<Result<Vec<_>>>()?;
    let labeling = vote(&predictions)?;
    if labeling.num_candidates() > 0 {
        return Ok(labeling);
    }
    let best = best_classifier(&ensembles[0], &sources[0])?;
    fallback_if_empty(labeling, &ensembles[0][best], target)
}

fn stratified_or_infinite(
    index: usize,
    source: &Domain,
    candidates: &FeatureMatrix,
    candidate_labels: &[Label],
    kernel: &Kernel,
) -> Result<f64> {
    match mmd_stratified_with_kernel(&source.features, source.labels()?, candidates, candidate_labels, kernel) {
        Ok(d) => Ok(d.value),
        Err(Error::NoCommonClass) => {
            log::warn!("source {index} shares no class with its candidates; distance set to infinity");
            Ok(f64::INFINITY)
        }
        Err(e) => Err(e),
    }
}

/// Stratified distance of every source to the pseudo-labeled target.
pub fn stratified_distances(sources: &[Domain], target: &FeatureMatrix, cfg: &SdsConfig) -> Result<Vec<f64>> {
    check_inputs(sources, target)?;
    let (sources, target, kernel) = prepare(sources, target, cfg)?;
    match cfg.scope {
        VotingScope::Pooled => {
            let labeling = label_target(&sources, &target, &cfg.voting)?;
            let candidates = target.select_rows(&labeling.candidate_indices);
            sources
                .par_iter()
                .enumerate()
                .map(|(i, s)| stratified_or_infinite(i, s, &candidates, &labeling.candidate_labels, &kernel))
                .collect()
        }
        VotingScope::PerSource => sources
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let ensemble = fit_ensemble(s, &cfg.voting)?;
                let mut labeling = majority_vote(&ensemble, &target)?;
                if labeling.num_candidates() == 0 {
                    let best = best_classifier(&ensemble, s)?;
                    labeling = fallback_if_empty(labeling, &ensemble[best], &target)?;
                }
                let candidates = target.select_rows(&labeling.candidate_indices);
                stratified_or_infinite(i, s, &candidates, &labeling.candidate_labels, &kernel)
            })
            .collect(),
    }
}

/// Picks the source with the smallest stratified distance (lowest index on
/// ties).
pub fn select_source(sources: &[Domain], target: &FeatureMatrix, cfg: &SdsConfig) -> Result<Ranking> {
    Ranking::from_distances(stratified_distances(sources, target, cfg)?)
}

/// Label-free distance of every source to the target.
pub fn global_distances(sources: &[Domain], target: &FeatureMatrix, cfg: &SdsConfig) -> Result<Vec<f64>> {
    check_inputs(sources, target)?;
    let (sources, target, kernel) = prepare(sources, target, cfg)?;
    sources
        .par_iter()
        .map(|s| mmd_with_kernel(&s.features, &target, &kernel))
        .collect()
}

pub fn rank_sources_global(sources: &[Domain], target: &FeatureMatrix, cfg: &SdsConfig) -> Result<Ranking> {
    Ranking::from_distances(global_distances(sources, target, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};

    fn domains(shifts: Vec<f64>) -> Vec<Domain> {
        generate_synthetic(&SyntheticSpec {
            num_classes: 3,
            dim: 4,
            samples_per_class: 20,
            domain_shifts: shifts,
            noise_scale: 0.5,
            seed: 11,
        })
        .unwrap()
    }

    #[test]
    fn single_source_is_selected() {
        let d = domains(vec![0.0, 3.0]);
        let r = select_source(&d[1..], &d[0].features, &SdsConfig::default()).unwrap();
        assert_eq!(r.selected, 0);
        assert_eq!(r.ranks(), vec![1]);
    }

    #[test]
    fn nearer_source_wins() {
        let d = domains(vec![0.0, 0.5, 5.0]);
        for scope in [VotingScope::Pooled, VotingScope::PerSource] {
            let cfg = SdsConfig {
                scope,
                ..SdsConfig::default()
            };
            let r = select_source(&d[1..], &d[0].features, &cfg).unwrap();
            assert_eq!(r.selected, 0, "{scope:?}");
            assert!(r.distances[0] < r.distances[1]);
        }
    }

    #[test]
    fn duplicates_tie_to_first() {
        let d = domains(vec![0.0, 1.0]);
        let sources = vec![d[1].clone(), d[1].clone()];
        let r = select_source(&sources, &d[0].features, &SdsConfig::default()).unwrap();
        assert_eq!(r.distances[0], r.distances[1]);
        assert_eq!(r.selected, 0);
    }

    #[test]
    fn identical_source_has_zero_global_distance() {
        let d = domains(vec![0.0, 2.0]);
        let sources = vec![d[1].clone(), d[0].clone()];
        let r = rank_sources_global(&sources, &d[0].features, &SdsConfig::default()).unwrap();
        assert_eq!(r.distances[1], 0.0);
        assert_eq!(r.selected, 1);
    }

    #[test]
    fn all_infinite_is_an_error() {
        assert!(matches!(
            Ranking::from_distances(vec![f64::INFINITY, f64::INFINITY]),
            Err(Error::NoFiniteSource)
        ));
        let r = Ranking::from_distances(vec![f64::INFINITY, 0.3, 0.3]).unwrap();
        assert_eq!(r.order, vec![1, 2, 0]);
    }
}
