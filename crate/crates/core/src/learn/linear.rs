//! Ordinary least squares, Gaussian naive Bayes and linear discriminant analysis.

use serde::{Deserialize, Serialize};

use super::linalg::{cholesky, cholesky_solve, Matrix};
use crate::simskin::Location;

pub const OLS_RIDGE: f64 = 1e-10;
pub const NB_VARIANCE_FLOOR: f64 = 1e-9;
pub const LDA_RIDGE: f64 = 1e-9;

/// `y = intercept + weights . z` on standardised features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModel {
    #[serde(with = "crate::hexfloat")]
    pub intercept: f64,
    #[serde(with = "crate::hexfloat::array4")]
    pub weights: [f64; 4],
}

impl LinearModel {
    /// Normal equations `(X^T X + ridge I) b = X^T y` with an intercept column.
    pub fn fit(x: &[[f64; 4]], y: &[f64]) -> Option<Self> {
        let row = |r: &[f64; 4]| [1.0, r[0], r[1], r[2], r[3]];
        let mut xtx = Matrix::zeros(5);
        let mut xty = [0.0; 5];
        for (r, &t) in x.iter().zip(y) {
            let a = row(r);
            for i in 0..5 {
                xty[i] += a[i] * t;
                for j in 0..5 {
                    xtx.data[i * 5 + j] += a[i] * a[j];
                }
            }
        }
        for i in 0..5 {
            xtx.data[i * 5 + i] += OLS_RIDGE;
        }
        let l = cholesky(&xtx)?;
        let b = cholesky_solve(&l, &xty);
        Some(Self { intercept: b[0], weights: [b[1], b[2], b[3], b[4]] })
    }

    pub fn predict(&self, z: &[f64; 4]) -> f64 {
        self.intercept + self.weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>()
    }
}

fn softmax(logits: &[(Location, f64)]) -> [f64; 3] {
    let max = logits.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; 3];
    let mut total = 0.0;
    for &(loc, v) in logits {
        let e = (v - max).exp();
        out[loc.index()] = e;
        total += e;
    }
    out.map(|v| v / total)
}

fn group(x: &[[f64; 4]], labels: &[Location]) -> Vec<(Location, Vec<[f64; 4]>)> {
    Location::ALL
        .iter()
        .map(|&loc| {
            let rows: Vec<[f64; 4]> = x.iter().zip(labels).filter(|(_, l)| **l == loc).map(|(r, _)| *r).collect();
            (loc, rows)
        })
        .filter(|(_, rows)| !rows.is_empty())
        .collect()
}

fn mean_of(rows: &[[f64; 4]]) -> [f64; 4] {
    let mut m = [0.0; 4];
    for r in rows {
        for j in 0..4 {
            m[j] += r[j];
        }
    }
    m.map(|v| v / rows.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassGaussian {
    pub label: Location,
    #[serde(with = "crate::hexfloat")]
    pub prior: f64,
    #[serde(with = "crate::hexfloat::array4")]
    pub mean: [f64; 4],
    #[serde(with = "crate::hexfloat::array4")]
    pub variance: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NaiveBayes {
    pub classes: Vec<ClassGaussian>,
}

impl NaiveBayes {
    pub fn fit(x: &[[f64; 4]], labels: &[Location]) -> Self {
        let n = x.len() as f64;
        let classes = group(x, labels)
            .into_iter()
            .map(|(label, rows)| {
                let mean = mean_of(&rows);
                let mut variance = [0.0; 4];
                for r in &rows {
                    for j in 0..4 {
                        variance[j] += (r[j] - mean[j]).powi(2);
                    }
                }
                let variance = variance.map(|v| (v / rows.len() as f64).max(NB_VARIANCE_FLOOR));
                ClassGaussian { label, prior: rows.len() as f64 / n, mean, variance }
            })
            .collect();
        Self { classes }
    }

    pub fn scores(&self, z: &[f64; 4]) -> [f64; 3] {
        let logits: Vec<(Location, f64)> = self
            .classes
            .iter()
            .map(|c| {
                let ll: f64 = (0..4)
                    .map(|j| {
                        let v = c.variance[j];
                        -0.5 * (std::f64::consts::TAU * v).ln() - (z[j] - c.mean[j]).powi(2) / (2.0 * v)
                    })
                    .sum();
                (c.label, c.prior.ln() + ll)
            })
            .collect();
        softmax(&logits)
    }
}

/// Per-class linear discriminant `z . w + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminantClass {
    pub label: Location,
    #[serde(with = "crate::hexfloat::array4")]
    pub weights: [f64; 4],
    #[serde(with = "crate::hexfloat")]
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearDiscriminant {
    pub classes: Vec<DiscriminantClass>,
}

impl LinearDiscriminant {
    /// Pooled within-class covariance plus a small ridge. `None` when the
    /// regularised covariance is still not positive definite.
    pub fn fit(x: &[[f64; 4]], labels: &[Location]) -> Option<Self> {
        let groups = group(x, labels);
        let n = x.len();
        let dof = if n > groups.len() { n - groups.len() } else { n };
        let mut cov = Matrix::zeros(4);
        let means: Vec<[f64; 4]> = groups.iter().map(|(_, rows)| mean_of(rows)).collect();
        for ((_, rows), m) in groups.iter().zip(&means) {
            for r in rows {
                for i in 0..4 {
                    for j in 0..4 {
                        cov.data[i * 4 + j] += (r[i] - m[i]) * (r[j] - m[j]);
                    }
                }
            }
        }
        for v in cov.data.iter_mut() {
            *v /= dof as f64;
        }
        for i in 0..4 {
            cov.data[i * 4 + i] += LDA_RIDGE;
        }
        let l = cholesky(&cov)?;
        let classes = groups
            .iter()
            .zip(&means)
            .map(|((label, rows), m)| {
                let w = cholesky_solve(&l, m);
                let quad: f64 = w.iter().zip(m).map(|(a, b)| a * b).sum();
                let prior = rows.len() as f64 / n as f64;
                DiscriminantClass { label: *label, weights: [w[0], w[1], w[2], w[3]], bias: -0.5 * quad + prior.ln() }
            })
            .collect();
        Some(Self { classes })
    }

    pub fn scores(&self, z: &[f64; 4]) -> [f64; 3] {
        let logits: Vec<(Location, f64)> = self
            .classes
            .iter()
            .map(|c| (c.label, c.bias + c.weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>()))
            .collect();
        softmax(&logits)
    }
}
