use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::distinct_labels;
use crate::data::{FeatureMatrix, Label};
use crate::error::{Error, Result};

const MAX_EPOCHS: usize = 1000;
const TOLERANCE: f64 = 1e-3;
const SHUFFLE_SEED: u64 = 0x5eed;

/// One-vs-rest hinge-loss linear classifier trained by dual coordinate
/// descent. The bias is an extra constant feature.
#[derive(Debug, Clone)]
pub struct LinearSvm {
    classes: Vec<Label>,
    /// One weight vector per class, `dim + 1` entries with the bias last.
    weights: Vec<Vec<f64>>,
}

fn dot_aug(w: &[f64], x: &[f64]) -> f64 {
    w[..x.len()].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[x.len()]
}

fn train_binary(rows: &FeatureMatrix, y: &[f64], c: f64) -> Vec<f64> {
    let n = rows.n_rows();
    let d = rows.n_cols();
    let q_diag: Vec<f64> = rows.rows().map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SHUFFLE_SEED);
    for _ in 0..MAX_EPOCHS {
        order.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            let x = rows.row(i);
            let g = y[i] * dot_aug(&w, x) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / q_diag[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y[i];
                for (wj, xj) in w.iter_mut().zip(x) {
                    *wj += step * xj;
                }
                w[d] += step;
            }
        }
        if pg_max - pg_min < TOLERANCE {
            break;
        }
    }
    w
}

impl LinearSvm {
    pub(crate) fn fit(rows: &FeatureMatrix, labels: &[Label], regularization: f64) -> Result<Self> {
        let classes = distinct_labels(labels);
        if classes.len() < 2 {
            return Err(Error::SingleClass);
        }
        let weights = classes
            .iter()
            .map(|&c| {
                let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
                train_binary(rows, &y, regularization)
            })
            .collect();
        Ok(Self { classes, weights })
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len() - 1
    }

    /// Highest one-vs-rest score; ties go to the smallest class id.
    pub fn predict_row(&self, row: &[f64]) -> Label {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (k, w) in self.weights.iter().enumerate() {
            let s = dot_aug(w, row);
            if s > best_score {
                best_score = s;
                best = k;
            }
        }
        self.classes[best]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_line() {
        let rows = FeatureMatrix::from_rows(&[[-2.0], [-1.0], [1.0], [2.0]]).unwrap();
        let svm = LinearSvm::fit(&rows, &[1, 1, 2, 2], 100.0).unwrap();
        assert_eq!(svm.predict_row(&[-0.5]), 1);
        assert_eq!(svm.predict_row(&[0.5]), 2);
        // max-margin boundary sits at zero
        let w = &svm.weights[1];
        assert!((w[1] / w[0]).abs() < 1e-2);
    }
}
