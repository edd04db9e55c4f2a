//! Synthetic sparse low-rank covariance instances.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hilbert::Point;
use crate::linalg::sym_eigen;

#[derive(Clone, Debug)]
pub struct Instance {
    /// Block-diagonal population covariance of rank `K`.
    pub sigma0: Point,
    /// Unbiased sample covariance of `n` draws.
    pub y: Point,
    pub block_sizes: Vec<usize>,
}

/// Uniformly random composition of `p` into `k` positive parts.
pub fn random_composition<R: Rng>(rng: &mut R, p: usize, k: usize) -> Vec<usize> {
    let mut cuts: Vec<usize> = sample(rng, p - 1, k - 1).into_iter().map(|c| c + 1).collect();
    cuts.sort_unstable();
    let mut sizes = Vec::with_capacity(k);
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(p)) {
        sizes.push(c - prev);
        prev = c;
    }
    sizes
}

pub fn generate_instance(p: usize, k: usize, n: usize, seed: u64) -> Result<Instance> {
    if k == 0 || p < k {
        return Err(Error::invalid(format!("need p >= K >= 1, got p = {p}, K = {k}")));
    }
    if n < 2 {
        return Err(Error::invalid(format!("need n >= 2 samples, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block_sizes = random_composition(&mut rng, p, k);
    let mut s0 = DMatrix::<f64>::zeros(p, p);
    let mut offset = 0;
    for &b in &block_sizes {
        let v: Vec<f64> = (0..b).map(|_| rng.random_range(-1.0..=1.0)).collect();
        for i in 0..b {
            for j in 0..b {
                s0[(offset + i, offset + j)] = v[i] * v[j];
            }
        }
        offset += b;
    }
    let sigma0 = Point::from_matrix(&s0)?;

    let (vals, vecs) = sym_eigen(&sigma0)?;
    let roots = DMatrix::from_diagonal(&DVector::from_iterator(p, vals.iter().map(|v| v.max(0.0).sqrt())));
    let sqrt = &vecs * roots * vecs.transpose();

    let normals: Vec<f64> = (0..p * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let z = DMatrix::from_column_slice(p, n, &normals);
    let x = sqrt * z;
    let mean = x.column_mean();
    let mut centred = x;
    for mut col in centred.column_iter_mut() {
        col -= &mean;
    }
    let cov = (&centred * centred.transpose()) / (n as f64 - 1.0);
    Ok(Instance { sigma0, y: Point::from_matrix(&cov)?, block_sizes })
}

/// `(1/N) Σ (a - b)²` over all `N` entries.
pub fn mse(yk: &Point, sigma0: &Point) -> Result<f64> {
    Ok(yk.sub(sigma0)?.mean_square())
}
