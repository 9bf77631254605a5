use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Matrix;

/// The crate-wide deterministic RNG.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weight matrix (`rows` = fan-in) with entries `N(0, 1) / sqrt(fan_in)`.
pub fn init_params(rows: usize, cols: usize, seed: u64) -> Matrix {
    init_params_with(rows, cols, &mut seeded_rng(seed))
}

pub fn init_params_with<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let scale = 1.0 / (rows.max(1) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    Matrix::from_vec(rows, cols, data).expect("length matches by construction")
}

pub fn init_bias(n: usize) -> Vec<f64> {
    vec![0.0; n]
}
