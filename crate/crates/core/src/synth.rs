//! Seeded synthetic matrices for tests, benchmarks and demos.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};

use crate::matcore::{qr_parts, DenseMatrix};

fn normal_dmatrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Matrix of i.i.d. standard normal entries.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_dmatrix(normal_dmatrix(rows, cols, &mut rng)).expect("finite by construction")
}

/// Random `rows × cols` matrix with orthonormal columns (`cols ≤ rows`).
pub fn random_orthonormal(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    assert!(cols <= rows);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    qr_parts(&normal_dmatrix(rows, cols, &mut rng)).0
}

/// `U·diag(spectrum)·Vᵀ` with random orthonormal `U`, `V`.
///
/// `spectrum.len()` must not exceed `min(rows, cols)`.
pub fn matrix_with_spectrum(rows: usize, cols: usize, spectrum: &[f64], seed: u64) -> DenseMatrix {
    let l = spectrum.len();
    assert!(l <= rows.min(cols));
    let u = random_orthonormal(rows, l, seed);
    let v = random_orthonormal(cols, l, seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut us = u;
    for (j, s) in spectrum.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    DenseMatrix::from_dmatrix(us * v.transpose()).expect("finite by construction")
}

/// Low-rank signal with the given spectrum plus i.i.d. Gaussian noise of scale `noise`.
pub fn low_rank_plus_noise(rows: usize, cols: usize, spectrum: &[f64], noise: f64, seed: u64) -> DenseMatrix {
    let signal = matrix_with_spectrum(rows, cols, spectrum, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151_5151_5151_5151);
    let e = normal_dmatrix(rows, cols, &mut rng) * noise;
    DenseMatrix::from_dmatrix(signal.into_inner() + e).expect("finite by construction")
}

/// Linearly spaced spectrum `hi, …, lo` of length `len`.
pub fn linear_spectrum(hi: f64, lo: f64, len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![hi];
    }
    (0..len)
        .map(|i| hi + (lo - hi) * i as f64 / (len - 1) as f64)
        .collect()
}
