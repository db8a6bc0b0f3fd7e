//! Seeded synthetic tasks with known ground truth for source selection and
//! transfer. Every domain draws its own noise.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Domain, FeatureMatrix, Label};
use crate::error::{Error, Result};

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v = gaussian(rng, dim, 1.0);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Draws `per_class` rows around each class center; rows are ordered by class.
fn sample_domain(
    centers: &[Vec<f64>],
    per_class: usize,
    noise: f64,
    rng: &mut ChaCha8Rng,
    id: &str,
) -> Result<Domain> {
    let mut rows = Vec::with_capacity(centers.len() * per_class);
    let mut labels = Vec::with_capacity(centers.len() * per_class);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            let e = gaussian(rng, center.len(), noise);
            rows.push(center.iter().zip(e).map(|(m, z)| m + z).collect::<Vec<f64>>());
            labels.push(c as Label + 1);
        }
    }
    Ok(Domain::labeled(FeatureMatrix::from_rows(&rows)?, labels)?.with_ids("benchmark", id))
}

fn shifted(centers: &[Vec<f64>], shifts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    centers
        .iter()
        .zip(shifts)
        .map(|(m, s)| m.iter().zip(s).map(|(a, b)| a + b).collect())
        .collect()
}

/// Source-selection benchmark.
///
/// The target has class centers drawn with spread `class_spread`. One source
/// moves each class by `near_shift` along a class-specific direction; the
/// others move by `far_shift`. In the scrambled variant one far source is
/// replaced by a copy of the target distribution whose class labels are
/// rotated, so its pooled marginal matches the target while every class is
/// misplaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionBenchmark {
    pub num_classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub class_spread: f64,
    pub noise_scale: f64,
    pub near_shift: f64,
    pub far_shift: f64,
    pub num_sources: usize,
}

impl Default for SelectionBenchmark {
    fn default() -> Self {
        Self {
            num_classes: 3,
            dim: 10,
            samples_per_class: 30,
            class_spread: 2.0,
            noise_scale: 1.0,
            near_shift: 1.0,
            far_shift: 2.5,
            num_sources: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectionTask {
    pub sources: Vec<Domain>,
    /// Labeled target; labels are for scoring only.
    pub target: Domain,
    /// Index of the class-wise nearest source.
    pub truth: usize,
    /// Index of the scrambled source, if any.
    pub scrambled: Option<usize>,
}

impl SelectionBenchmark {
    fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.dim == 0 || self.samples_per_class < 2 || self.num_sources < 2 {
            return Err(Error::InvalidArgument("selection benchmark needs >= 2 classes, sources and samples".into()));
        }
        Ok(())
    }

    pub fn task(&self, seed: u64, scrambled: bool) -> Result<SelectionTask> {
        self.validate()?;
        if scrambled && self.num_sources < 3 {
            return Err(Error::InvalidArgument("the scrambled variant needs >= 3 sources".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers: Vec<Vec<f64>> = (0..self.num_classes)
            .map(|_| gaussian(&mut rng, self.dim, self.class_spread))
            .collect();
        let mut roles: Vec<usize> = (0..self.num_sources).collect();
        roles.shuffle(&mut rng);
        let truth = roles[0];
        let scrambled_index = scrambled.then(|| roles[1]);

        let target = sample_domain(&centers, self.samples_per_class, self.noise_scale, &mut rng, "target")?;
        let mut sources = Vec::with_capacity(self.num_sources);
        for k in 0..self.num_sources {
            let id = format!("source{k}");
            let domain_centers = if Some(k) == scrambled_index {
                let mut rotated = centers.clone();
                rotated.rotate_left(1);
                rotated
            } else {
                let magnitude = if k == truth { self.near_shift } else { self.far_shift };
                let shifts: Vec<Vec<f64>> = (0..self.num_classes)
                    .map(|_| unit(&mut rng, self.dim).into_iter().map(|u| u * magnitude).collect())
                    .collect();
                shifted(&centers, &shifts)
            };
            sources.push(sample_domain(&domain_centers, self.samples_per_class, self.noise_scale, &mut rng, &id)?);
        }
        Ok(SelectionTask {
            sources,
            target,
            truth,
            scrambled: scrambled_index,
        })
    }
}

/// Cross-domain transfer benchmark: every class of the target is displaced by
/// `shift` along its own random direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferBenchmark {
    pub num_classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub class_spread: f64,
    pub noise_scale: f64,
    pub shift: f64,
}

impl Default for TransferBenchmark {
    fn default() -> Self {
        Self {
            num_classes: 3,
            dim: 12,
            samples_per_class: 40,
            class_spread: 2.0,
            noise_scale: 1.0,
            shift: 11.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransferTask {
    pub source: Domain,
    pub target: Domain,
}

impl TransferBenchmark {
    pub fn task(&self, seed: u64) -> Result<TransferTask> {
        if self.num_classes < 2 || self.dim == 0 || self.samples_per_class < 2 {
            return Err(Error::InvalidArgument("transfer benchmark needs >= 2 classes and samples".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers: Vec<Vec<f64>> = (0..self.num_classes)
            .map(|_| gaussian(&mut rng, self.dim, self.class_spread))
            .collect();
        let shifts: Vec<Vec<f64>> = (0..self.num_classes)
            .map(|_| unit(&mut rng, self.dim).into_iter().map(|u| u * self.shift).collect())
            .collect();
        let source = sample_domain(&centers, self.samples_per_class, self.noise_scale, &mut rng, "source")?;
        let target = sample_domain(
            &shifted(&centers, &shifts),
            self.samples_per_class,
            self.noise_scale,
            &mut rng,
            "target",
        )?;
        Ok(TransferTask { source, target })
    }
}
