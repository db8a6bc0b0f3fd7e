use crate::data::{FeatureMatrix, Label};

/// Brute-force Euclidean k-nearest-neighbour vote.
#[derive(Debug, Clone)]
pub struct NearestNeighbors {
    k: usize,
    rows: FeatureMatrix,
    labels: Vec<Label>,
}

impl NearestNeighbors {
    pub(crate) fn fit(rows: &FeatureMatrix, labels: &[Label], k: usize) -> Self {
        Self {
            k: k.min(rows.n_rows()),
            rows: rows.clone(),
            labels: labels.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.n_cols()
    }

    /// Neighbours are ordered by distance, then by training index. A tied vote
    /// goes to the tied class whose member ranks first.
    pub fn predict_row(&self, row: &[f64]) -> Label {
        let mut dists: Vec<(f64, usize)> = self
            .rows
            .rows()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let by_rank = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dists.len() {
            dists.select_nth_unstable_by(self.k - 1, by_rank);
            dists.truncate(self.k);
        }
        dists.sort_by(by_rank);

        let mut tally: Vec<(Label, usize, usize)> = Vec::new(); // (label, votes, first rank)
        for (rank, &(_, i)) in dists.iter().enumerate() {
            let l = self.labels[i];
            match tally.iter_mut().find(|t| t.0 == l) {
                Some(t) => t.1 += 1,
                None => tally.push((l, 1, rank)),
            }
        }
        tally
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
            .map(|t| t.0)
            .expect("k >= 1")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_goes_to_nearest_class() {
        let rows = FeatureMatrix::from_rows(&[[0.0], [1.0], [3.0], [10.0]]).unwrap();
        let model = NearestNeighbors::fit(&rows, &[1, 2, 3, 3], 3);
        // neighbours of 0.9: 1.0 (class 2), 0.0 (class 1), 3.0 (class 3) -> 1-1-1 tie
        assert_eq!(model.predict_row(&[0.9]), 2);
        // neighbours of 6.0: 3.0, 10.0 (class 3) and 1.0
        assert_eq!(model.predict_row(&[6.0]), 3);
    }

    #[test]
    fn k_larger_than_training_set() {
        let rows = FeatureMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let model = NearestNeighbors::fit(&rows, &[1, 1], 5);
        assert_eq!(model.predict_row(&[4.0]), 1);
    }
}
