use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Domain, FeatureMatrix, Label};
use crate::error::{Error, Result};

/// Spread of the per-class base means around the origin.
const CLASS_MEAN_SCALE: f64 = 3.0;
/// Separates the noise stream from the structure stream of the same seed.
const NOISE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Class-conditional Gaussian cross-domain generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    /// One entry per generated domain: how far every class mean moves along
    /// its class direction.
    pub domain_shifts: Vec<f64>,
    pub noise_scale: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::InvalidArgument("num_classes must be >= 2".into()));
        }
        if self.dim < 1 {
            return Err(Error::InvalidArgument("dim must be >= 1".into()));
        }
        if self.samples_per_class < 2 {
            return Err(Error::InvalidArgument("samples_per_class must be >= 2".into()));
        }
        if self.domain_shifts.is_empty() {
            return Err(Error::InvalidArgument("domain_shifts must be non-empty".into()));
        }
        if let Some(s) = self.domain_shifts.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "domain shift {s} must be finite and non-negative"
            )));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return Err(Error::InvalidArgument("noise_scale must be positive".into()));
        }
        Ok(())
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, dim);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Generates one labeled domain per entry of `domain_shifts`.
///
/// Class means and shift directions come from `seed`. Every domain reuses the
/// same noise draws, so two domains differ exactly by their mean shifts.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<Domain>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let classes: Vec<(Vec<f64>, Vec<f64>)> = (0..spec.num_classes)
        .map(|_| {
            let mean = gaussian_vec(&mut rng, spec.dim)
                .into_iter()
                .map(|x| x * CLASS_MEAN_SCALE)
                .collect();
            (mean, unit_vec(&mut rng, spec.dim))
        })
        .collect();

    let n = spec.num_classes * spec.samples_per_class;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ NOISE_STREAM);
    let noise: Vec<f64> = (0..n * spec.dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            spec.noise_scale * z
        })
        .collect();

    let labels: Vec<Label> = (1..=spec.num_classes as Label)
        .flat_map(|c| std::iter::repeat_n(c, spec.samples_per_class))
        .collect();

    spec.domain_shifts
        .iter()
        .enumerate()
        .map(|(k, &shift)| {
            let mut data = Vec::with_capacity(n * spec.dim);
            for (i, &label) in labels.iter().enumerate() {
                let (mean, dir) = &classes[(label - 1) as usize];
                let eps = &noise[i * spec.dim..(i + 1) * spec.dim];
                data.extend(
                    mean.iter()
                        .zip(dir)
                        .zip(eps)
                        .map(|((m, d), e)| m + shift * d + e),
                );
            }
            let features = FeatureMatrix::new(n, spec.dim, data)?;
            Ok(Domain::labeled(features, labels.clone())?
                .with_ids("synthetic", format!("domain{k}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::split_by_class;

    fn spec(shifts: Vec<f64>) -> SyntheticSpec {
        SyntheticSpec {
            num_classes: 3,
            dim: 4,
            samples_per_class: 10,
            domain_shifts: shifts,
            noise_scale: 0.5,
            seed: 11,
        }
    }

    #[test]
    fn zero_shifts_give_identical_domains() {
        let d = generate_synthetic(&spec(vec![0.0, 0.0])).unwrap();
        assert_eq!(d[0].features, d[1].features);
    }

    #[test]
    fn counts_and_labels() {
        let d = generate_synthetic(&spec(vec![1.0])).unwrap();
        assert_eq!(d[0].n_rows(), 30);
        let labels = d[0].labels().unwrap();
        for c in 1..=3 {
            assert_eq!(labels.iter().filter(|&&l| l == c).count(), 10);
        }
    }

    #[test]
    fn class_mean_distance_matches_shift() {
        let mut s = spec(vec![0.0, 5.0]);
        s.samples_per_class = 500;
        s.noise_scale = 0.1;
        let d = generate_synthetic(&s).unwrap();
        let a = split_by_class(&d[0]).unwrap();
        let b = split_by_class(&d[1]).unwrap();
        for c in 1..=3 {
            let ma = a[&c].column_means();
            let mb = b[&c].column_means();
            let dist = ma.iter().zip(&mb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!((dist - 5.0).abs() <= 0.2, "class {c}: {dist}");
        }
    }

    #[test]
    fn reproducible() {
        let a = generate_synthetic(&spec(vec![0.3, 2.0])).unwrap();
        let b = generate_synthetic(&spec(vec![0.3, 2.0])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = spec(vec![]);
        assert!(generate_synthetic(&s).is_err());
        s.domain_shifts = vec![f64::NAN];
        assert!(generate_synthetic(&s).is_err());
        s.domain_shifts = vec![1.0];
        s.num_classes = 1;
        assert!(generate_synthetic(&s).is_err());
    }
}
