//! Data-parallel kernels with a sequential fallback.
//!
//! With the `parallel` feature enabled the loops below run on the rayon
//! global pool; without it they run on the calling thread. Work is always
//! split into the same fixed-size blocks, so results are bit-identical
//! across thread counts and across the two builds.

use nalgebra::DMatrix;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Columns of the left operand handled per task in [`tr_mul`].
const COL_BLOCK: usize = 64;
/// Rows of the left operand handled per task in [`mul`].
const ROW_BLOCK: usize = 256;

/// Evaluates `f(i)` for `i in 0..n`, in order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

fn blocks(len: usize, width: usize) -> Vec<(usize, usize)> {
    (0..len.div_ceil(width))
        .map(|b| {
            let start = b * width;
            (start, width.min(len - start))
        })
        .collect()
}

/// `aᵀ·b`, split over the columns of `a`.
pub fn tr_mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows(), "tr_mul: row counts differ");
    let parts = blocks(a.ncols(), COL_BLOCK);
    let pieces = map_range(parts.len(), |p| {
        let (start, len) = parts[p];
        a.columns(start, len).tr_mul(b)
    });
    let mut out = DMatrix::zeros(a.ncols(), b.ncols());
    for ((start, len), piece) in parts.iter().zip(pieces) {
        out.rows_mut(*start, *len).copy_from(&piece);
    }
    out
}

/// `a·b`, split over the rows of `a`.
pub fn mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows(), "mul: inner dimensions differ");
    let parts = blocks(a.nrows(), ROW_BLOCK);
    let pieces = map_range(parts.len(), |p| {
        let (start, len) = parts[p];
        a.rows(start, len) * b
    });
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for ((start, len), piece) in parts.iter().zip(pieces) {
        out.rows_mut(*start, *len).copy_from(&piece);
    }
    out
}

/// Gram matrix `aᵀ·a`.
pub fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    let g = tr_mul(a, a);
    // symmetrize so the eigen-solver sees an exactly symmetric input
    (&g + g.transpose()) * 0.5
}

/// Squared Euclidean norm of every column.
pub fn column_sq_norms(a: &DMatrix<f64>) -> Vec<f64> {
    map_range(a.ncols(), |j| a.column(j).norm_squared())
}

/// Sizes the global pool. Only the first call in a process has an effect.
pub fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            log::debug!("global thread pool already configured: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}

/// Runs `f` on a dedicated pool with `threads` workers.
///
/// Used by the benchmarks to compare one worker against many inside a
/// single build. Without the `parallel` feature `f` runs inline.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

/// Whether this build runs kernels on a thread pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
