#![allow(dead_code)]

use geolex::htm::{GeoPoint, UnitVector};
use geolex::linalg::DenseMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut impl Rng, m: usize, n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn gaussian_matrix(rng: &mut impl Rng, m: usize, n: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(m, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Uniform direction on the sphere, as a geographic point.
pub fn sphere_point(rng: &mut impl Rng) -> GeoPoint {
    loop {
        let (x, y, z): (f64, f64, f64) = (
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if let Some(v) = UnitVector::new(x, y, z) {
            return v.to_geo();
        }
    }
}

/// `L₀ = A Bᵀ` with n×rank standard normal factors scaled by `1/√n`, plus
/// `S₀` with `round(frac · n²)` entries set to ±1 at random positions.
pub struct Planted {
    pub low_rank: DenseMatrix,
    pub sparse: DenseMatrix,
    pub x: DenseMatrix,
}

pub fn planted(seed: u64, n: usize, rank: usize, frac: f64) -> Planted {
    let mut r = rng(seed);
    let scale = 1.0 / (n as f64).sqrt();
    let a = gaussian_matrix(&mut r, n, rank, scale);
    let b = gaussian_matrix(&mut r, n, rank, scale);
    let low_rank = a.matmul(&b.transpose()).unwrap();
    let mut sparse = DenseMatrix::zeros(n, n);
    let count = (frac * (n * n) as f64).round() as usize;
    for k in sample(&mut r, n * n, count) {
        sparse.as_mut_slice()[k] = if r.gen::<bool>() { 1.0 } else { -1.0 };
    }
    let x = low_rank.add(&sparse).unwrap();
    Planted { low_rank, sparse, x }
}
