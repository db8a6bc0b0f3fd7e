//! Stratified activity transfer: an intra-class kernel subspace learned from
//! the source and the pseudo-labeled target candidates, followed by a second
//! annotation and iterative label refinement.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classifier::{Classifier, ClassifierConfig};
use crate::data::{Domain, FeatureMatrix, Label, Standardizer};
use crate::error::{Error, Result};
use crate::kernel::{cross_gram, gram, Kernel, KernelSpec};
use crate::linalg::smallest_generalized_eigenpairs;
use crate::pseudo_label::{pseudo_label, PseudoLabeling};

/// Ridge added to `K H K` before factorization.
pub const CONSTRAINT_JITTER: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatConfig {
    pub num_dims: usize,
    pub lambda: f64,
    pub kernel: KernelSpec,
    pub max_iterations: usize,
    /// Stop once fewer than this fraction of candidate labels change.
    pub convergence_fraction: f64,
    /// Learner used for both steps of the second annotation.
    pub annotator: ClassifierConfig,
    /// Z-score both domains with source statistics before transfer.
    pub standardize: bool,
}

impl Default for SatConfig {
    fn default() -> Self {
        Self {
            num_dims: 30,
            lambda: 1.0,
            kernel: KernelSpec::linear(),
            max_iterations: 10,
            convergence_fraction: 0.01,
            annotator: ClassifierConfig::knn(1),
            standardize: true,
        }
    }
}

impl SatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_dims == 0 {
            return Err(Error::InvalidArgument("num_dims must be >= 1".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidArgument("lambda must be finite and non-negative".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.convergence_fraction) {
            return Err(Error::InvalidArgument("convergence_fraction must lie in [0, 1]".into()));
        }
        self.annotator.validate()
    }

    fn check_dims(&self, n: usize) -> Result<()> {
        if self.num_dims + 1 > n {
            return Err(Error::InvalidArgument(format!(
                "num_dims {} exceeds n_s + n_c - 1 = {}",
                self.num_dims,
                n.saturating_sub(1)
            )));
        }
        Ok(())
    }
}

/// Learned embedding `Wᵀ k(x, ·)` over the stacked training rows.
#[derive(Debug, Clone)]
pub struct TransferModel {
    pub w: DMatrix<f64>,
    pub kernel: Kernel,
    pub train_rows: FeatureMatrix,
    pub num_source: usize,
    pub class_ids: Vec<Label>,
    /// Retained generalized eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
}

impl TransferModel {
    pub fn num_dims(&self) -> usize {
        self.w.ncols()
    }

    /// Embeds rows by evaluating the kernel against every training row.
    pub fn embed(&self, rows: &FeatureMatrix) -> Result<FeatureMatrix> {
        if rows.n_cols() != self.train_rows.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: self.train_rows.n_cols(),
                got: rows.n_cols(),
            });
        }
        if rows.is_empty() {
            return Ok(FeatureMatrix::empty(self.num_dims()));
        }
        let k = cross_gram(rows, &self.train_rows, &self.kernel);
        FeatureMatrix::from_dmatrix(&(k * &self.w))
    }
}

/// Coefficient vector `v` with `L_c = v vᵀ`: `+1/n_s^c` on source rows of
/// class `c`, `-1/n_t^c` on candidate rows of class `c`.
pub fn intra_class_vector(source_labels: &[Label], candidate_labels: &[Label], class: Label) -> Result<DVector<f64>> {
    let ns = source_labels.iter().filter(|&&l| l == class).count();
    let nt = candidate_labels.iter().filter(|&&l| l == class).count();
    if ns == 0 || nt == 0 {
        return Err(Error::ClassAbsent(class));
    }
    let (ps, pt) = (1.0 / ns as f64, -1.0 / nt as f64);
    Ok(DVector::from_iterator(
        source_labels.len() + candidate_labels.len(),
        source_labels
            .iter()
            .map(|&l| if l == class { ps } else { 0.0 })
            .chain(candidate_labels.iter().map(|&l| if l == class { pt } else { 0.0 })),
    ))
}

/// Intra-class MMD coefficient matrix over `[source; candidates]`.
pub fn build_intra_class_mmd(source_labels: &[Label], candidate_labels: &[Label], class: Label) -> Result<DMatrix<f64>> {
    let v = intra_class_vector(source_labels, candidate_labels, class)?;
    Ok(&v * v.transpose())
}

/// Classes present on both sides, ascending. Missing ones are logged.
pub fn shared_classes(source_labels: &[Label], candidate_labels: &[Label]) -> Result<Vec<Label>> {
    let s: BTreeSet<Label> = source_labels.iter().copied().collect();
    let t: BTreeSet<Label> = candidate_labels.iter().copied().collect();
    let shared: Vec<Label> = s.intersection(&t).copied().collect();
    let skipped: Vec<Label> = s.symmetric_difference(&t).copied().collect();
    if !skipped.is_empty() {
        log::warn!("classes {skipped:?} lack source or candidate rows and are left out of the intra-class term");
    }
    if shared.is_empty() {
        return Err(Error::NoCommonClass);
    }
    Ok(shared)
}

/// `Σ_c tr(K L_c) = Σ_c vᵀ K v` over the given classes.
pub fn intra_class_objective(
    k: &DMatrix<f64>,
    source_labels: &[Label],
    candidate_labels: &[Label],
    classes: &[Label],
) -> Result<f64> {
    let mut total = 0.0;
    for &c in classes {
        let v = intra_class_vector(source_labels, candidate_labels, c)?;
        total += v.dot(&(k * &v));
    }
    Ok(total)
}

/// Builds `B = K H K + εI` without forming `H`.
pub fn constraint_matrix(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let ones = k.column_sum();
    let mut b = k * k - (&ones * ones.transpose()) / n as f64;
    for i in 0..n {
        b[(i, i)] += CONSTRAINT_JITTER;
    }
    crate::linalg::symmetrize(&b)
}

/// Solves the pencil `(K M K + λI, K H K)` for a given MMD coefficient matrix
/// product `K M K`.
pub(crate) fn solve_pencil(
    k: &DMatrix<f64>,
    kmk: DMatrix<f64>,
    lambda: f64,
    num_dims: usize,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = k.nrows();
    let mut a = kmk;
    for i in 0..n {
        a[(i, i)] += lambda;
    }
    let b = constraint_matrix(k);
    let eig = smallest_generalized_eigenpairs(&a, &b, num_dims)?;
    Ok((eig.vectors, eig.values))
}

/// Learns the intra-class transfer subspace from labeled source rows and
/// pseudo-labeled candidates.
pub fn solve_transform(
    source: &Domain,
    candidates: &FeatureMatrix,
    candidate_labels: &[Label],
    cfg: &SatConfig,
) -> Result<TransferModel> {
    cfg.validate()?;
    let source_labels = source.labels()?;
    if candidate_labels.len() != candidates.n_rows() {
        return Err(Error::LengthMismatch {
            left: candidate_labels.len(),
            right: candidates.n_rows(),
        });
    }
    if candidates.is_empty() {
        return Err(Error::EmptyInput("candidates"));
    }
    let train_rows = source.features.vstack(candidates)?;
    cfg.check_dims(train_rows.n_rows())?;
    let classes = shared_classes(source_labels, candidate_labels)?;
    let kernel = cfg.kernel.resolve(&[&train_rows])?;
    let k = gram(&train_rows, &kernel);

    let n = k.nrows();
    let mut kmk = DMatrix::zeros(n, n);
    for &c in &classes {
        let u = &k * intra_class_vector(source_labels, candidate_labels, c)?;
        kmk.ger(1.0, &u, &u, 1.0);
    }
    let (w, eigenvalues) = solve_pencil(&k, kmk, cfg.lambda, cfg.num_dims)?;
    Ok(TransferModel {
        w,
        kernel,
        train_rows,
        num_source: source.n_rows(),
        class_ids: classes,
        eigenvalues,
    })
}

fn fit_or_constant(cfg: &ClassifierConfig, rows: &FeatureMatrix, labels: &[Label]) -> Result<Option<Classifier>> {
    let first = labels[0];
    if labels.iter().all(|&l| l == first) {
        return Ok(None);
    }
    Classifier::fit(cfg, rows, labels).map(Some)
}

fn predict_or_constant(model: &Option<Classifier>, constant: Label, rows: &FeatureMatrix) -> Result<Vec<Label>> {
    match model {
        Some(m) => m.predict(rows),
        None => Ok(vec![constant; rows.n_rows()]),
    }
}

/// Relabels candidates in the learned subspace, then labels residuals from
/// the relabeled candidates in the original space.
pub fn second_annotation(
    model: &TransferModel,
    source: &Domain,
    candidates: &FeatureMatrix,
    residuals: &FeatureMatrix,
    annotator: &ClassifierConfig,
) -> Result<(Vec<Label>, Vec<Label>)> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("candidates"));
    }
    let source_labels = source.labels()?;
    let embedded = model.embed(&source.features.vstack(candidates)?)?;
    let ns = source.n_rows();
    let emb_source = embedded.select_rows(&(0..ns).collect::<Vec<_>>());
    let emb_can = embedded.select_rows(&(ns..embedded.n_rows()).collect::<Vec<_>>());

    let first = fit_or_constant(annotator, &emb_source, source_labels)?;
    let y_can = predict_or_constant(&first, source_labels[0], &emb_can)?;
    if residuals.is_empty() {
        return Ok((y_can, Vec::new()));
    }
    let second = fit_or_constant(annotator, candidates, &y_can)?;
    let y_res = predict_or_constant(&second, y_can[0], residuals)?;
    Ok((y_can, y_res))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub labels_changed: usize,
    /// `Σ_c tr(K L_c)` of the labeling the iteration started from.
    pub objective: f64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SatOutcome {
    /// One label per target row in the original order.
    pub labels: Vec<Label>,
    pub trace: Vec<IterationTrace>,
    /// Initial voting split; fixed for every iteration.
    pub initial: PseudoLabeling,
    pub model: TransferModel,
    pub converged: bool,
}

fn stitch(labeling: &PseudoLabeling, y_can: &[Label], y_res: &[Label]) -> Vec<Label> {
    let mut out = vec![0; labeling.n_rows()];
    for (&i, &l) in labeling.candidate_indices.iter().zip(y_can) {
        out[i] = l;
    }
    for (&i, &l) in labeling.residual_indices.iter().zip(y_res) {
        out[i] = l;
    }
    out
}

fn accuracy(truth: &[Label], pred: &[Label]) -> f64 {
    truth.iter().zip(pred).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Full transfer loop. `truth`, when given, only feeds the trace.
pub fn run_sat(
    source: &Domain,
    target: &FeatureMatrix,
    voting: &[ClassifierConfig],
    cfg: &SatConfig,
    truth: Option<&[Label]>,
) -> Result<SatOutcome> {
    cfg.validate()?;
    if source.dim() != target.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            got: target.n_cols(),
        });
    }
    if let Some(t) = truth {
        if t.len() != target.n_rows() {
            return Err(Error::LengthMismatch {
                left: t.len(),
                right: target.n_rows(),
            });
        }
    }
    let (source, target) = if cfg.standardize {
        let z = Standardizer::fit(&source.features)?;
        (z.transform_domain(source)?, z.transform(target)?)
    } else {
        (source.clone(), target.clone())
    };
    let source_labels = source.labels()?;

    let initial = pseudo_label(&source, &target, voting)?;
    let x_can = target.select_rows(&initial.candidate_indices);
    let x_res = target.select_rows(&initial.residual_indices);
    let n_can = x_can.n_rows();

    let mut current = initial.candidate_labels.clone();
    let mut trace = Vec::new();
    let mut labels = Vec::new();
    let mut model = None;
    let mut converged = false;
    for iteration in 1..=cfg.max_iterations {
        let m = solve_transform(&source, &x_can, &current, cfg)?;
        let k = gram(&m.train_rows, &m.kernel);
        let objective = intra_class_objective(&k, source_labels, &current, &m.class_ids)?;
        let (y_can, y_res) = second_annotation(&m, &source, &x_can, &x_res, &cfg.annotator)?;
        let labels_changed = y_can.iter().zip(&current).filter(|(a, b)| a != b).count();
        labels = stitch(&initial, &y_can, &y_res);
        trace.push(IterationTrace {
            iteration,
            labels_changed,
            objective,
            accuracy: truth.map(|t| accuracy(t, &labels)),
        });
        log::debug!("iteration {iteration}: {labels_changed} of {n_can} candidate labels changed");
        current = y_can;
        model = Some(m);
        if (labels_changed as f64) < cfg.convergence_fraction * n_can as f64 {
            converged = true;
            break;
        }
    }
    Ok(SatOutcome {
        labels,
        trace,
        initial,
        model: model.expect("at least one iteration"),
        converged,
    })
}

pub fn write_trace_csv<W: Write>(trace: &[IterationTrace], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "labels_changed", "objective", "accuracy"])?;
    for t in trace {
        w.write_record([
            t.iteration.to_string(),
            t.labels_changed.to_string(),
            t.objective.to_string(),
            t.accuracy.map(|a| a.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}

pub fn save_trace_csv(trace: &[IterationTrace], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_csv(trace, file)
}
