//! Seeded synthetic NMF data `A = U*V*ᵀ + noise`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub a: DenseMatrix,
    /// `M×R` ground-truth factor.
    pub u: DenseMatrix,
    /// `N×R` ground-truth factor.
    pub v: DenseMatrix,
}

/// `A = max(0, U*V*ᵀ + noise_level · rms(U*V*ᵀ) · Z)` with `U*`, `V*` uniform
/// on `[0, 1]` and `Z` standard normal, all drawn from `seed`.
///
/// `noise_level = 0` leaves `A` exactly factorizable (no noise draws happen).
pub fn generate_synthetic(m: usize, n: usize, rank: usize, noise_level: f64, seed: u64) -> Result<SyntheticData> {
    if rank == 0 || rank > m.min(n) {
        return Err(Error::invalid(format!("rank {rank} must lie in 1..=min({m}, {n})")));
    }
    if !(noise_level >= 0.0 && noise_level.is_finite()) {
        return Err(Error::invalid(format!("noise level must be nonnegative, got {noise_level}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = DenseMatrix::new(m, rank, (0..m * rank).map(|_| rng.gen::<f64>()).collect())?;
    let v = DenseMatrix::new(n, rank, (0..n * rank).map(|_| rng.gen::<f64>()).collect())?;
    let mut a = u.mul_transpose(&v)?;
    if noise_level > 0.0 {
        let scale = noise_level * a.frobenius_norm() / ((m * n) as f64).sqrt();
        for i in 0..m {
            for j in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                a.set(i, j, (a.get(i, j) + scale * z).max(0.0));
            }
        }
    }
    Ok(SyntheticData { a, u, v })
}
