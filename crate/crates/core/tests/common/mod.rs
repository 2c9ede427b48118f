//! Independent oracles and fixtures shared by the integration suites.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use zslc::io::SynthConfig;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Minimizes `‖X − DY‖² + γ‖D‖²` by fixed-step gradient descent until the
/// gradient norm drops below `tol`.
pub fn ridge_by_descent(x: &DMatrix<f64>, y: &DMatrix<f64>, gamma: f64, tol: f64) -> DMatrix<f64> {
    let g = y * y.transpose();
    let step = 1.0 / (2.0 * (g.trace() + gamma));
    let mut d = DMatrix::zeros(x.nrows(), y.nrows());
    for _ in 0..1_000_000 {
        let grad = (&d * y - x) * y.transpose() * 2.0 + &d * (2.0 * gamma);
        if grad.norm() < tol {
            break;
        }
        d -= grad * step;
    }
    d
}

/// Textbook Lloyd iteration on columns of `x` from the given centers.
/// Ties go to the lowest index; empty clusters keep their center.
pub fn plain_kmeans(x: &DMatrix<f64>, mut centers: DMatrix<f64>, max_iters: usize) -> Vec<usize> {
    let n = x.ncols();
    let k = centers.ncols();
    let assign = |centers: &DMatrix<f64>| -> Vec<usize> {
        (0..n)
            .map(|i| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for j in 0..k {
                    let mut d = 0.0;
                    for r in 0..x.nrows() {
                        let t = x[(r, i)] - centers[(r, j)];
                        d += t * t;
                    }
                    if d < best_d {
                        best_d = d;
                        best = j;
                    }
                }
                best
            })
            .collect()
    };
    let mut labels = assign(&centers);
    for _ in 0..max_iters {
        for j in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == j).collect();
            if members.is_empty() {
                continue;
            }
            for r in 0..x.nrows() {
                let s: f64 = members.iter().map(|&i| x[(r, i)]).sum();
                centers[(r, j)] = s / members.len() as f64;
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

/// Gaussian blobs around `k` random centers in `d` dimensions.
pub fn blobs(d: usize, n: usize, k: usize, spread: f64, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let centers = randn(d, k, &mut r) * spread;
    let mut x = DMatrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = r.random_range(0..k);
        for row in 0..d {
            x[(row, i)] = centers[(row, c)] + r.sample::<f64, _>(StandardNormal);
        }
        labels.push(c);
    }
    (x, labels)
}

/// The desk-scale recovery scenario: 10-d features, 8-d signatures, six
/// seen and four unseen classes of 100 instances each.
pub fn recovery_config(seed: u64, shift: f64) -> SynthConfig {
    SynthConfig {
        d: 10,
        r: 8,
        n_s: 6,
        n_u: 4,
        per_class: 100,
        noise_std: 1.0,
        separation: 20.0,
        shift,
        seed,
    }
}

pub fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}
