//! Shared helpers for unit, property and acceptance tests.

use nalgebra::Matrix3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::QTensor;

/// Deterministic test generator.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random traceless symmetric tensor with entries of order `scale`.
pub fn random_qtensor<R: Rng>(r: &mut R, scale: f64) -> QTensor {
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = r.random_range(-scale..scale);
        }
    }
    QTensor::project(m)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
