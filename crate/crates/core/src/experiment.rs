//! End-to-end comparison runs scored against held-out target labels.

use std::fmt;
use std::fs::{self, OpenOptions};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{tca_transform, Pca};
use crate::classifier::{Classifier, ClassifierConfig};
use crate::data::{Domain, FeatureMatrix, Label, Standardizer};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, f1_macro, ConfusionMatrix};
use crate::sat::{run_sat, SatConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SourceOnly1nn,
    Pca,
    Tca,
    StlSat,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::SourceOnly1nn, Method::Pca, Method::Tca, Method::StlSat];

    pub fn name(self) -> &'static str {
        match self {
            Method::SourceOnly1nn => "source-only-1nn",
            Method::Pca => "pca",
            Method::Tca => "tca",
            Method::StlSat => "stl-sat",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sat: SatConfig,
    pub voting: Vec<ClassifierConfig>,
    /// Trees in the downstream forest used by the PCA and TCA baselines.
    pub final_trees: usize,
    /// Record wall-clock time in reports. Off keeps reports byte-stable.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sat: SatConfig::default(),
            voting: ClassifierConfig::default_ensemble(0),
            final_trees: 30,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    /// Copy with every seeded learner reseeded from `seed`.
    pub fn seeded(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.voting = self.voting.iter().map(|c| c.reseeded(seed)).collect();
        out.sat.annotator = self.sat.annotator.reseeded(seed);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub task_id: String,
    pub method: Method,
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_averaging: String,
    pub confusion: ConfusionMatrix,
    pub seed: u64,
    pub wall_time: f64,
}

impl ExperimentReport {
    pub fn from_predictions(
        task_id: &str,
        method: Method,
        truth: &[Label],
        predicted: &[Label],
        seed: u64,
        wall_time: f64,
    ) -> Result<Self> {
        Ok(Self {
            task_id: task_id.to_string(),
            method,
            accuracy: accuracy(truth, predicted)?,
            f1_macro: f1_macro(truth, predicted)?,
            f1_averaging: "macro".into(),
            confusion: ConfusionMatrix::new(truth, predicted)?,
            seed,
            wall_time,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn scaled(source: &Domain, target: &FeatureMatrix, standardize: bool) -> Result<(Domain, FeatureMatrix)> {
    if standardize {
        let z = Standardizer::fit(&source.features)?;
        Ok((z.transform_domain(source)?, z.transform(target)?))
    } else {
        Ok((source.clone(), target.clone()))
    }
}

fn forest_on(train: &FeatureMatrix, labels: &[Label], apply: &FeatureMatrix, trees: usize, seed: u64) -> Result<Vec<Label>> {
    Classifier::fit(&ClassifierConfig::forest(trees, seed), train, labels)?.predict(apply)
}

/// Target labels predicted by `method`; target labels are never read.
pub fn predict_target(
    source: &Domain,
    target: &FeatureMatrix,
    method: Method,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<Label>> {
    let cfg = cfg.seeded(seed);
    if method == Method::StlSat {
        return Ok(run_sat(source, target, &cfg.voting, &cfg.sat, None)?.labels);
    }
    let (source, target) = scaled(source, target, cfg.sat.standardize)?;
    let labels = source.labels()?;
    match method {
        Method::SourceOnly1nn => Classifier::fit(&ClassifierConfig::knn(1), &source.features, labels)?.predict(&target),
        Method::Pca => {
            let m = cfg.sat.num_dims.min(source.dim());
            let pca = Pca::fit(&source.features.vstack(&target)?, m)?;
            let (s, t) = (pca.transform(&source.features)?, pca.transform(&target)?);
            forest_on(&s, labels, &t, cfg.final_trees, seed)
        }
        Method::Tca => {
            let model = tca_transform(&source.features, &target, &cfg.sat)?;
            let (s, t) = (model.embed(&source.features)?, model.embed(&target)?);
            forest_on(&s, labels, &t, cfg.final_trees, seed)
        }
        Method::StlSat => unreachable!(),
    }
}

/// Runs one method on a task and scores it with the target labels.
pub fn run_experiment(
    task_id: &str,
    source: &Domain,
    target: &Domain,
    method: Method,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    let truth = target.labels()?;
    let start = Instant::now();
    let predicted = predict_target(source, &target.features, method, cfg, seed)?;
    let wall_time = if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    ExperimentReport::from_predictions(task_id, method, truth, &predicted, seed, wall_time)
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(path, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save_report(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, report.to_json()?.as_bytes())
}

pub const AGGREGATE_HEADER: [&str; 6] = ["task", "method", "accuracy", "f1", "seed", "wall_time"];

/// Appends one row to the aggregate table, writing the header for a new file.
pub fn append_aggregate_row(path: impl AsRef<Path>, report: &ExperimentReport) -> Result<()> {
    let path = path.as_ref();
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(AGGREGATE_HEADER)?;
    }
    w.write_record([
        report.task_id.clone(),
        report.method.to_string(),
        report.accuracy.to_string(),
        report.f1_macro.to_string(),
        report.seed.to_string(),
        report.wall_time.to_string(),
    ])?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Human-readable summary of a report.
pub fn summary(report: &ExperimentReport) -> String {
    format!(
        "task {} method {}: accuracy {:.4}, macro F1 {:.4}\n{}",
        report.task_id,
        report.method,
        report.accuracy,
        report.f1_macro,
        report.confusion.to_table()
    )
}
