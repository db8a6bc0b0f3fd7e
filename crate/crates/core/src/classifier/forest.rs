use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{distinct_labels, plurality};
use crate::data::{FeatureMatrix, Label};

#[derive(Debug, Clone)]
enum Node {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART tree over dense class indices, stored as an arena.
#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(c) => return c,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

struct Builder<'a> {
    rows: &'a FeatureMatrix,
    targets: &'a [usize],
    num_classes: usize,
    max_features: usize,
    max_depth: Option<usize>,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &i in idx {
            counts[self.targets[i]] += 1;
        }
        counts
    }

    /// Best (weighted gini, feature, threshold) over a random feature subset.
    fn best_split(&mut self, idx: &[usize], parent: &[usize]) -> Option<(usize, f64)> {
        let d = self.rows.n_cols();
        let features = sample(&mut self.rng, d, self.max_features.min(d));
        let n = idx.len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for feature in features.iter() {
            order.sort_by(|&a, &b| {
                self.rows.row(a)[feature]
                    .total_cmp(&self.rows.row(b)[feature])
                    .then(a.cmp(&b))
            });
            let mut left = vec![0usize; self.num_classes];
            let mut right = parent.to_vec();
            for pos in 0..n - 1 {
                let c = self.targets[order[pos]];
                left[c] += 1;
                right[c] -= 1;
                let here = self.rows.row(order[pos])[feature];
                let next = self.rows.row(order[pos + 1])[feature];
                if next <= here {
                    continue;
                }
                let nl = pos + 1;
                let score = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
                if best.is_none_or(|(b, _, _)| score < b - 1e-15) {
                    best = Some((score, feature, 0.5 * (here + next)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(majority(&counts)));
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || idx.len() < 2 || self.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&idx, &counts) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.rows.row(i)[feature] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Bagged CART trees with √d features tried per split.
#[derive(Debug, Clone)]
pub struct RandomForest {
    classes: Vec<Label>,
    trees: Vec<Tree>,
    dim: usize,
}

impl RandomForest {
    pub(crate) fn fit(
        rows: &FeatureMatrix,
        labels: &[Label],
        num_trees: usize,
        max_depth: Option<usize>,
        seed: u64,
    ) -> Self {
        let classes = distinct_labels(labels);
        let targets: Vec<usize> = labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label in class list"))
            .collect();
        let n = rows.n_rows();
        let max_features = ((rows.n_cols() as f64).sqrt().round() as usize).max(1);
        let trees = (0..num_trees)
            .into_par_iter()
            .map(|t| {
                let tree_seed = seed ^ (t as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
                let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut builder = Builder {
                    rows,
                    targets: &targets,
                    num_classes: classes.len(),
                    max_features,
                    max_depth,
                    rng,
                    nodes: Vec::new(),
                };
                builder.grow(bootstrap, 0);
                Tree { nodes: builder.nodes }
            })
            .collect();
        Self {
            classes,
            trees,
            dim: rows.n_cols(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn predict_row(&self, row: &[f64]) -> Label {
        plurality(self.trees.iter().map(|t| self.classes[t.predict(row)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tree_fits_threshold() {
        let rows = FeatureMatrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]]).unwrap();
        let labels = [1, 1, 1, 2, 2, 2];
        let forest = RandomForest::fit(&rows, &labels, 25, None, 9);
        assert_eq!(forest.predict_row(&[0.2]), 1);
        assert_eq!(forest.predict_row(&[4.8]), 2);
    }

    #[test]
    fn depth_limit_produces_stumps() {
        let rows = FeatureMatrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        let forest = RandomForest::fit(&rows, &[1, 2, 2, 1], 5, Some(1), 3);
        assert!(forest.trees.iter().all(|t| t.nodes.len() <= 3));
    }

    #[test]
    fn single_class_is_constant() {
        let rows = FeatureMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let forest = RandomForest::fit(&rows, &[4, 4], 3, None, 0);
        assert_eq!(forest.predict_row(&[7.0]), 4);
    }
}
