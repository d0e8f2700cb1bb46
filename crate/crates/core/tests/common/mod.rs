//! Independent reference implementations used by the oracle and acceptance
//! tests. Everything here is deliberately naive.
#![allow(dead_code, clippy::needless_range_loop)]

use astskin::learn::{GpKernel, KernelKind, Metric, Weighting};
use astskin::simskin::Location;

/// Small xorshift generator so the oracles do not share the library RNG.
pub struct XorShift(pub u64);

impl XorShift {
    pub fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// `(2/N) |sum_n x[n] exp(-2 pi i k n / N)|` by direct summation.
pub fn direct_bin_amplitude(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    let (mut re, mut im) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        // Reduce k*i mod N first so the phase stays accurate.
        let phase = -2.0 * std::f64::consts::PI * ((k * i) % n) as f64 / n as f64;
        re += v * phase.cos();
        im += v * phase.sin();
    }
    2.0 / n as f64 * (re * re + im * im).sqrt()
}

pub fn direct_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in x.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * ((k * i) % n) as f64 / n as f64;
                re += v * phase.cos();
                im += v * phase.sin();
            }
            (re, im)
        })
        .collect()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for j in 0..2 * n {
                        m[r][j] -= f * m[c][j];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn kernel_value(k: &GpKernel, a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let r = r2.sqrt();
    let (s2, l) = (k.signal_variance, k.length_scale);
    match k.kind {
        KernelKind::SquaredExponential => s2 * (-0.5 * r2 / (l * l)).exp(),
        KernelKind::Exponential => s2 * (-r / l).exp(),
        KernelKind::Matern52 => {
            let u = (5.0f64).sqrt() * r / l;
            s2 * (1.0 + u + u * u / 3.0) * (-u).exp()
        }
        KernelKind::RationalQuadratic => s2 * (1.0 + r2 / (2.0 * k.alpha * l * l)).powf(-k.alpha),
    }
}

/// Posterior mean and latent variance via an explicit inverse of `K + noise I`.
pub fn gp_oracle(
    x: &[[f64; 4]],
    y: &[f64],
    kernel: &GpKernel,
    queries: &[[f64; 4]],
) -> Vec<(f64, f64)> {
    let n = x.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let kmat: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| kernel_value(kernel, &x[i], &x[j]) + if i == j { kernel.noise_variance } else { 0.0 })
                .collect()
        })
        .collect();
    let inv = invert(&kmat);
    queries
        .iter()
        .map(|q| {
            let ks: Vec<f64> = x.iter().map(|xi| kernel_value(kernel, q, xi)).collect();
            let mut mu = mean;
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    mu += ks[i] * inv[i][j] * (y[j] - mean);
                    quad += ks[i] * inv[i][j] * ks[j];
                }
            }
            (mu, kernel_value(kernel, q, q) - quad)
        })
        .collect()
}

pub fn metric_distance(metric: Metric, a: &[f64; 4], b: &[f64; 4]) -> f64 {
    match metric {
        Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
        Metric::Minkowski3 => a.iter().zip(b).map(|(x, y)| (x - y).abs().powi(3)).sum::<f64>().powf(1.0 / 3.0),
        Metric::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 { 1.0 } else { 1.0 - dot / (na * nb) }
        }
    }
}

/// Exhaustive kNN: sort every training row by (distance, index), take `k`,
/// vote, then pick the first label with the largest vote.
pub fn knn_oracle(
    inputs: &[[f64; 4]],
    labels: &[Location],
    k: usize,
    weighting: Weighting,
    metric: Metric,
    q: &[f64; 4],
) -> (Location, Vec<usize>) {
    let mut all: Vec<(f64, usize)> = inputs.iter().enumerate().map(|(i, x)| (metric_distance(metric, q, x), i)).collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let nb = &all[..k.min(all.len())];
    let mut votes = [0.0f64; 3];
    let exact: Vec<_> = nb.iter().filter(|(d, _)| *d == 0.0).collect();
    for &(d, i) in nb {
        let w = match weighting {
            Weighting::Uniform => 1.0,
            Weighting::InverseSquaredDistance if !exact.is_empty() => {
                if d == 0.0 { 1.0 } else { 0.0 }
            }
            Weighting::InverseSquaredDistance => 1.0 / (d * d),
        };
        votes[labels[i].index()] += w;
    }
    let mut best = 0;
    for c in 1..3 {
        if votes[c] > votes[best] {
            best = c;
        }
    }
    (Location::ALL[best], nb.iter().map(|&(_, i)| i).collect())
}
