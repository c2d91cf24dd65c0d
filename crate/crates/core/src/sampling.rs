//! Reproducible standard-normal sample sets.
//!
//! Generator: ChaCha20 keyed by `seed_from_u64(seed)`, with point `i` drawn
//! from stream `i` (`set_stream(i)`), so each point is independent of how many
//! points were requested before it. Every coordinate consumes exactly one
//! 64-bit word: the top 52 bits give `u = (k + 0.5) / 2^52` in the open unit
//! interval, mapped to `z = -sqrt(2) · erfc⁻¹(2u)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::function::erf::erfc_inv;

use crate::scalar::Scalar;

/// Open-interval uniform from one 64-bit word.
pub fn unit_uniform(word: u64) -> f64 {
    // 52 bits keep `k + 0.5` exact, so u never rounds to 1.
    ((word >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Standard normal quantile.
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// The ChaCha20 stream used for point `index` under `seed`.
pub fn point_stream(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `dim` independent standard normals from stream `index`.
pub fn gaussian_point<T: Scalar>(seed: u64, index: u64, dim: usize) -> Vec<T> {
    let mut rng = point_stream(seed, index);
    (0..dim).map(|_| T::lit(normal_quantile(unit_uniform(rng.next_u64())))).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet<T: Scalar> {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub points: Vec<Vec<T>>,
}

impl<T: Scalar> SampleSet<T> {
    pub fn draw(n: usize, m: usize, seed: u64) -> Self {
        let points = (0..m as u64).map(|i| gaussian_point(seed, i, n)).collect();
        SampleSet { n, m, seed, points }
    }

    /// Wraps explicit points, e.g. for hand-built test inputs.
    pub fn from_points(n: usize, points: Vec<Vec<T>>, seed: u64) -> Self {
        assert!(points.iter().all(|p| p.len() == n), "every point needs {n} coordinates");
        SampleSet { n, m: points.len(), seed, points }
    }
}
