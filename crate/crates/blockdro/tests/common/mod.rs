#![allow(dead_code)]

use blockdro::moments::{MomentSpec, Partition, RawMomentSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random means in `[-2, 2]` and block covariances `A A' + 0.2 I`.
pub fn random_spec(part: Partition, rng: &mut ChaCha8Rng) -> MomentSpec {
    let n = part.n();
    let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let pi = part
        .blocks()
        .iter()
        .map(|b| {
            let k = b.len();
            let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
            let m = DMatrix::from_fn(k, 1, |i, _| mu[b[i]]);
            &a * a.transpose() + DMatrix::identity(k, k) * 0.2 + &m * m.transpose()
        })
        .collect();
    MomentSpec::validate(RawMomentSpec { partition: part, mu, pi }, 1e-9).unwrap()
}

/// Pairs with random means, standard deviations in `[0.3, 2]` and correlation `rho`.
pub fn random_paired(n: usize, rho: f64, rng: &mut ChaCha8Rng) -> MomentSpec {
    let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let sd: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..2.0)).collect();
    let tol = if rho.abs() == 1.0 { -1e-9 } else { 1e-9 };
    MomentSpec::paired(&mu, &sd, &vec![rho; n / 2], tol).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
