//! k-nearest-neighbour location classifier.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::simskin::Location;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    Uniform,
    InverseSquaredDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Euclidean,
    /// `1 - cos(angle)`; a zero vector is at distance 1 from everything.
    Cosine,
    Minkowski3,
}

impl Weighting {
    pub fn name(self) -> &'static str {
        match self {
            Weighting::Uniform => "uniform",
            Weighting::InverseSquaredDistance => "inverse-squared-distance",
        }
    }
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
            Metric::Minkowski3 => "minkowski-3",
        }
    }

    pub fn distance(self, a: &[f64; 4], b: &[f64; 4]) -> f64 {
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::Minkowski3 => a.iter().zip(b).map(|(x, y)| (x - y).abs().powi(3)).sum::<f64>().cbrt(),
            Metric::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (na * nb)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnClassifier {
    pub k: usize,
    pub weighting: Weighting,
    pub metric: Metric,
    #[serde(with = "crate::hexfloat::rows")]
    pub inputs: Vec<[f64; 4]>,
    pub labels: Vec<Location>,
}

/// Heap entry ordered by (distance, index) so the heap top is the current
/// worst neighbour.
#[derive(PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl KnnClassifier {
    pub fn new(k: usize, weighting: Weighting, metric: Metric, inputs: Vec<[f64; 4]>, labels: Vec<Location>) -> Self {
        Self { k, weighting, metric, inputs, labels }
    }

    /// Indices and distances of the `k` nearest training rows, nearest first.
    /// Equal distances are ordered by training index.
    pub fn neighbours(&self, x: &[f64; 4]) -> Vec<(usize, f64)> {
        let k = self.k.min(self.inputs.len());
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        for (i, row) in self.inputs.iter().enumerate() {
            let c = Candidate(self.metric.distance(x, row), i);
            if heap.len() < k {
                heap.push(c);
            } else if heap.peek().is_some_and(|worst| c < *worst) {
                heap.pop();
                heap.push(c);
            }
        }
        heap.into_sorted_vec().into_iter().map(|Candidate(d, i)| (i, d)).collect()
    }

    /// Normalised per-class vote shares, indexed by [`Location::index`].
    pub fn scores(&self, x: &[f64; 4]) -> [f64; 3] {
        let nb = self.neighbours(x);
        let mut votes = [0.0; 3];
        match self.weighting {
            Weighting::Uniform => {
                for &(i, _) in &nb {
                    votes[self.labels[i].index()] += 1.0;
                }
            }
            Weighting::InverseSquaredDistance => {
                if nb.iter().any(|&(_, d)| d == 0.0) {
                    for &(i, d) in &nb {
                        if d == 0.0 {
                            votes[self.labels[i].index()] += 1.0;
                        }
                    }
                } else {
                    for &(i, d) in &nb {
                        votes[self.labels[i].index()] += 1.0 / (d * d);
                    }
                }
            }
        }
        let total: f64 = votes.iter().sum();
        votes.map(|v| v / total)
    }
}
