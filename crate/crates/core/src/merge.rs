//! Merge-and-truncate of truncated factors from adjacent column blocks.
//!
//! Given `X ≈ U₁Σ₁V₁ᵀ` and `Y ≈ U₂Σ₂V₂ᵀ`, the left factor of `[X Y]` is
//! assembled from `U₁`, the part of `U₂` orthogonal to it, and a small
//! `(r₁+r₂)`-square SVD. Right vectors are never formed.

use nalgebra::{DMatrix, DVector};

use crate::error::{PodError, Result};
use crate::matcore::{qr_parts, svd_parts, TruncatedFactor};
use crate::par;

/// Relative threshold below which a merged singular value counts as zero.
const ZERO_SIGMA: f64 = 1e-14;
/// Largest tolerated `‖U₁ᵀU_o‖_max` before a second projection pass.
const REORTH_TRIGGER: f64 = 1e-8;

/// Merges two truncated factors and truncates the result to `r` modes.
///
/// `f1.u` must have orthonormal columns; `f2.u` need not. Both factors are
/// truncated to `r` first. An empty `f2` returns `f1` truncated; an empty
/// `f1` returns the orthonormalized `f2`.
pub fn block_merge(f1: &TruncatedFactor, f2: &TruncatedFactor, r: usize) -> Result<TruncatedFactor> {
    if f1.rows() != f2.rows() {
        return Err(PodError::shape(format!(
            "cannot merge factors with {} and {} rows",
            f1.rows(),
            f2.rows()
        )));
    }
    if r == 0 {
        return Err(PodError::param("merge rank must be at least 1"));
    }
    let a = f1.truncate(r).without_v();
    let b = f2.truncate(r).without_v();
    if b.is_empty() {
        return Ok(a);
    }
    let (l1, l2) = (a.rank(), b.rank());
    let (u1, s1) = (a.u(), a.sigma());
    let (u2, s2) = (b.u(), b.sigma());

    let mut cross = par::tr_mul(u1, u2);
    let ut = u2 - par::mul(u1, &cross);
    let (mut uo, mut rr) = qr_parts(&ut);

    if l1 > 0 {
        let leak = par::tr_mul(u1, &uo);
        if leak.amax() > REORTH_TRIGGER {
            log::debug!("block_merge: re-orthogonalizing, leak {:.3e}", leak.amax());
            // U_o = U₁M + Q′R′, hence U_t = U₁(M·R) + Q′(R′·R).
            let (q2, r2) = qr_parts(&(&uo - par::mul(u1, &leak)));
            cross += &leak * &rr;
            rr = r2 * rr;
            uo = q2;
        }
    }

    let l = l1 + l2;
    let mut e = DMatrix::zeros(l, l);
    for i in 0..l1 {
        e[(i, i)] = s1[i];
    }
    for j in 0..l2 {
        for i in 0..l1 {
            e[(i, l1 + j)] = cross[(i, j)] * s2[j];
        }
        for i in 0..l2 {
            e[(l1 + i, l1 + j)] = rr[(i, j)] * s2[j];
        }
    }
    let (ue, se, _) = svd_parts(&e)?;
    let top = se.iter().copied().next().unwrap_or(0.0);
    let keep = se
        .iter()
        .take(r)
        .take_while(|&&s| top > 0.0 && s > ZERO_SIGMA * top)
        .count();
    if keep == 0 {
        return Ok(TruncatedFactor::empty(f1.rows()));
    }
    let mut basis = DMatrix::zeros(f1.rows(), l);
    basis.columns_mut(0, l1).copy_from(u1);
    basis.columns_mut(l1, l2).copy_from(&uo);
    let u = par::mul(&basis, &ue.columns(0, keep).into_owned());
    let sigma = DVector::from_iterator(keep, se.iter().take(keep).copied());
    let mut out = TruncatedFactor::new(u, sigma, None)?;
    out.canonicalize_signs();
    Ok(out)
}

/// Left fold of [`block_merge`] over `factors`, truncated to `r`.
pub fn merge_chain(factors: &[TruncatedFactor], r: usize) -> Result<TruncatedFactor> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| PodError::param("merge_chain needs at least one factor"))?;
    if r == 0 {
        return Err(PodError::param("merge rank must be at least 1"));
    }
    let mut acc = first.truncate(r).without_v();
    for f in rest {
        acc = block_merge(&acc, f, r)?;
    }
    Ok(acc)
}

/// Inputs of the spectral error bound for a chain of merges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeBoundInput {
    /// Number of column blocks `P`.
    pub partitions: u32,
    /// `σ_{r+1}` of the full matrix.
    pub sigma_r_plus_1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeBound {
    pub value: f64,
    /// The integer coefficient overflowed; `value` is `+∞` (or 0 when σ is 0).
    pub saturated: bool,
}

/// Largest partition count whose coefficient `2^{P+1} − 3` fits in a `u64`
/// without loss.
const MAX_EXACT_PARTITIONS: u32 = 60;

/// Spectral error bound `(2^{P+1} − 3)·σ_{r+1}` for `P` merged blocks.
pub fn mat_error_bound(input: MergeBoundInput) -> Result<MergeBound> {
    let MergeBoundInput {
        partitions: p,
        sigma_r_plus_1: s,
    } = input;
    if p == 0 {
        return Err(PodError::param("partition count must be at least 1"));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(PodError::param(format!("sigma_r_plus_1 = {s} must be finite and nonnegative")));
    }
    if s == 0.0 {
        return Ok(MergeBound {
            value: 0.0,
            saturated: p > MAX_EXACT_PARTITIONS,
        });
    }
    if p > MAX_EXACT_PARTITIONS {
        return Ok(MergeBound {
            value: f64::INFINITY,
            saturated: true,
        });
    }
    let coeff = (1u64 << (p + 1)) - 3;
    Ok(MergeBound {
        value: coeff as f64 * s,
        saturated: false,
    })
}

/// Approximate flop count `14mn²/P + 192n³/P²` of a rank-`r` factor built
/// from `P` merged blocks (`r ≪ n`).
pub fn mat_flops_estimate(m: u64, n: u64, p: u64) -> Result<f64> {
    if m == 0 || n == 0 || p == 0 {
        return Err(PodError::param("m, n and P must all be at least 1"));
    }
    let (m, n, p) = (m as f64, n as f64, p as f64);
    Ok(14.0 * m * n * n / p + 192.0 * n * n * n / (p * p))
}

/// Flop factor of a dense SVD, `≈ β·mn²`, as commonly quoted for
/// Golub-Kahan based solvers.
pub const DENSE_SVD_FLOP_FACTOR: f64 = 6.0;

/// Expected speedup of the Gram route over a dense SVD for an `m × n` matrix:
/// `βmn² / (2mn² + (β+16)n³)`.
pub fn gram_route_speedup(m: u64, n: u64) -> f64 {
    let (m, n) = (m as f64, n as f64);
    let b = DENSE_SVD_FLOP_FACTOR;
    b * m * n * n / (2.0 * m * n * n + (b + 16.0) * n * n * n)
}
