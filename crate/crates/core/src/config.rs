//! Flat key-value run configuration.
//!
//! Learners are written as compact strings: `knn:K`, `forest:TREES` or
//! `forest:TREES:DEPTH`, and `svm:C`. A kernel bandwidth of `0` selects the
//! median heuristic.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierConfig;
use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::features::{LabelRule, WindowingConfig};
use crate::kernel::{Bandwidth, KernelKind, KernelSpec};
use crate::sat::SatConfig;
use crate::sds::{SdsConfig, VotingScope};

pub const SEED_ENV: &str = "STRATUM_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub window_seconds: f64,
    pub overlap: f64,
    pub label_rule: LabelRule,
    pub voting: Vec<String>,
    pub standardize: bool,
    pub sds_kernel: KernelKind,
    pub sds_sigma: f64,
    pub sds_scope: VotingScope,
    pub sat_dims: usize,
    pub sat_lambda: f64,
    pub sat_kernel: KernelKind,
    pub sat_sigma: f64,
    pub sat_iterations: usize,
    pub sat_convergence: f64,
    pub annotator: String,
    pub final_trees: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sat = SatConfig::default();
        Self {
            seed: 0,
            window_seconds: 5.0,
            overlap: 0.5,
            label_rule: LabelRule::MajorityLabel,
            voting: vec!["svm:100".into(), "knn:3".into(), "forest:30".into()],
            standardize: true,
            sds_kernel: KernelKind::Rbf,
            sds_sigma: 0.0,
            sds_scope: VotingScope::Pooled,
            sat_dims: sat.num_dims,
            sat_lambda: sat.lambda,
            sat_kernel: KernelKind::Linear,
            sat_sigma: 0.0,
            sat_iterations: sat.max_iterations,
            sat_convergence: sat.convergence_fraction,
            annotator: "knn:1".into(),
            final_trees: 30,
        }
    }
}

/// Parses a compact learner string; forests take `seed`.
pub fn parse_learner(spec: &str, seed: u64) -> Result<ClassifierConfig> {
    let bad = || Error::Config(format!("cannot parse learner '{spec}'"));
    let parts: Vec<&str> = spec.trim().split(':').collect();
    let cfg = match parts.as_slice() {
        ["knn", k] => ClassifierConfig::knn(k.parse().map_err(|_| bad())?),
        ["forest", t] => ClassifierConfig::forest(t.parse().map_err(|_| bad())?, seed),
        ["forest", t, d] => ClassifierConfig::RandomForest {
            num_trees: t.parse().map_err(|_| bad())?,
            max_depth: Some(d.parse().map_err(|_| bad())?),
            seed,
        },
        ["svm", c] => ClassifierConfig::svm(c.parse().map_err(|_| bad())?),
        _ => return Err(bad()),
    };
    cfg.validate().map_err(|e| Error::Config(format!("learner '{spec}': {e}")))?;
    Ok(cfg)
}

fn kernel_spec(kind: KernelKind, sigma: f64) -> Result<KernelSpec> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Config(format!("kernel bandwidth must be >= 0, got {sigma}")));
    }
    Ok(KernelSpec {
        kind,
        bandwidth: if sigma == 0.0 {
            Bandwidth::MedianHeuristic
        } else {
            Bandwidth::Fixed(sigma)
        },
    })
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a file; keys left out keep their defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let defaults = toml::Table::try_from(RunConfig::default()).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in defaults {
            table.entry(k).or_insert(v);
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key with its value.
    pub fn dump(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies the seed override from the environment, if set.
    pub fn with_env_seed(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got '{v}'")))?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.windowing().geometry(1e6).map(|_| ())?;
        self.voting_configs()?;
        self.sds_config()?;
        self.sat_config()?.validate()?;
        if self.final_trees == 0 {
            return Err(Error::Config("final_trees must be >= 1".into()));
        }
        Ok(())
    }

    pub fn windowing(&self) -> WindowingConfig {
        WindowingConfig {
            window_seconds: self.window_seconds,
            overlap_fraction: self.overlap,
            label_rule: self.label_rule,
        }
    }

    pub fn voting_configs(&self) -> Result<Vec<ClassifierConfig>> {
        if self.voting.len() < 2 {
            return Err(Error::Config("voting needs at least two learners".into()));
        }
        self.voting.iter().map(|s| parse_learner(s, self.seed)).collect()
    }

    pub fn sds_config(&self) -> Result<SdsConfig> {
        Ok(SdsConfig {
            kernel: kernel_spec(self.sds_kernel, self.sds_sigma)?,
            voting: self.voting_configs()?,
            scope: self.sds_scope,
            standardize: self.standardize,
        })
    }

    pub fn sat_config(&self) -> Result<SatConfig> {
        Ok(SatConfig {
            num_dims: self.sat_dims,
            lambda: self.sat_lambda,
            kernel: kernel_spec(self.sat_kernel, self.sat_sigma)?,
            max_iterations: self.sat_iterations,
            convergence_fraction: self.sat_convergence,
            annotator: parse_learner(&self.annotator, self.seed)?,
            standardize: self.standardize,
        })
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            sat: self.sat_config()?,
            voting: self.voting_configs()?,
            final_trees: self.final_trees,
            timing: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips() {
        let cfg = RunConfig::default();
        let text = cfg.dump().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
        assert!(text.contains("sat_dims = 30"));
        assert!(text.contains("sat_lambda = 1.0"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = RunConfig::default().dump().unwrap() + "bogus = 1\n";
        assert!(RunConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn partial_file_uses_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 7\nsat_kernel = \"rbf\"\nsat_sigma = 2.0\n").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.sat_config().unwrap().kernel, KernelSpec::rbf(2.0));
        assert_eq!(cfg.sat_dims, 30);
        std::fs::write(&path, "sat_dimz = 3\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn learner_strings() {
        assert_eq!(parse_learner("knn:3", 0).unwrap(), ClassifierConfig::knn(3));
        assert_eq!(parse_learner("forest:30", 5).unwrap(), ClassifierConfig::forest(30, 5));
        assert_eq!(parse_learner("svm:100", 0).unwrap(), ClassifierConfig::svm(100.0));
        assert!(parse_learner("knn:0", 0).is_err());
        assert!(parse_learner("tree", 0).is_err());
    }
}
