//! Single-round sampled SVDs: column sampling (LTSVD) and column-and-row
//! sampling (CTSVD), each with an optional duplicate-free path.
//!
//! The inner decomposition is taken from the Gram matrix of the sampled
//! block (`CᵀC` or `WᵀW`), and the left vectors are recovered as
//! `ũᵢ = C·ṽᵢ/σ̃ᵢ`. With `dedup` the duplicated draws are collapsed and
//! rescaled; singular values and left vectors are unchanged.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{PodError, Result};
use crate::matcore::{factor_from_gram, DenseMatrix, TruncatedFactor};
use crate::par;
use crate::sampling::{
    row_norm_distribution, sample_with_replacement, scale_sampled_columns, scale_sampled_rows,
    scale_sampled_rows_repeated, Distribution, SampleDraw,
};

/// Output of a single-round sampler.
#[derive(Debug, Clone)]
pub struct SampledFactor {
    /// Left vectors and singular value estimates; `v` is absent.
    pub factor: TruncatedFactor,
    /// Number of modes asked for.
    pub requested: usize,
    /// Distinct columns in the draw.
    pub distinct_columns: usize,
    /// Distinct rows in the row draw, for column-and-row sampling.
    pub distinct_rows: Option<usize>,
}

impl SampledFactor {
    /// Fewer modes than requested (rank-deficient sample or filtered out).
    pub fn is_short(&self) -> bool {
        self.factor.rank() < self.requested
    }

    /// No usable mode at all.
    pub fn is_empty(&self) -> bool {
        self.factor.is_empty()
    }
}

fn check_common(a: &DenseMatrix, dist: &Distribution, k: usize, c: usize) -> Result<()> {
    if k == 0 || k > a.rows().min(a.cols()) {
        return Err(PodError::param(format!(
            "k = {k} must lie in 1..={}",
            a.rows().min(a.cols())
        )));
    }
    if c == 0 {
        return Err(PodError::param("column sample count must be at least 1"));
    }
    if dist.indices().last().is_some_and(|&i| i >= a.cols()) {
        return Err(PodError::shape(format!(
            "distribution refers to column {} of a {}-column matrix",
            dist.indices().last().unwrap(),
            a.cols()
        )));
    }
    if c < k {
        log::warn!("sampling c = {c} columns for k = {k} modes; at most {c} modes can be recovered");
    }
    Ok(())
}

/// Column-sampling SVD with a fresh draw of `c` columns.
pub fn ltsvd<R: Rng + ?Sized>(
    a: &DenseMatrix,
    dist: &Distribution,
    k: usize,
    c: usize,
    rng: &mut R,
    dedup: bool,
) -> Result<SampledFactor> {
    check_common(a, dist, k, c)?;
    let draw = sample_with_replacement(dist, c, rng)?;
    ltsvd_from_draw(a, &draw, dist, k, c, dedup)
}

/// Column-sampling SVD for a given column draw.
pub fn ltsvd_from_draw(
    a: &DenseMatrix,
    draw: &SampleDraw,
    dist: &Distribution,
    k: usize,
    c: usize,
    dedup: bool,
) -> Result<SampledFactor> {
    check_common(a, dist, k, c)?;
    let cm = scale_sampled_columns(a.as_mat(), draw, dist, c, dedup)?;
    let gram = par::gram(&cm);
    let factor = factor_from_gram(&cm, gram, k, false, cm.shape())?;
    Ok(SampledFactor {
        factor,
        requested: k,
        distinct_columns: draw.distinct(),
        distinct_rows: None,
    })
}

/// Column-and-row sampling SVD with fresh draws.
///
/// `epsilon` enables the small-singular-value filter `σ̃² ≥ ε/(100k)·‖W‖_F²`;
/// pass `None` to keep every numerically nonzero mode up to `k`.
#[allow(clippy::too_many_arguments)]
pub fn ctsvd<R: Rng + ?Sized>(
    a: &DenseMatrix,
    dist: &Distribution,
    k: usize,
    c: usize,
    w: usize,
    epsilon: Option<f64>,
    rng: &mut R,
    dedup: bool,
) -> Result<SampledFactor> {
    check_common(a, dist, k, c)?;
    if w == 0 {
        return Err(PodError::param("row sample count must be at least 1"));
    }
    let col_draw = sample_with_replacement(dist, c, rng)?;
    let cm = scale_sampled_columns(a.as_mat(), &col_draw, dist, c, dedup)?;
    let q = row_norm_distribution(&cm)?;
    let row_draw = sample_with_replacement(&q, w, rng)?;
    ctsvd_inner(&cm, &col_draw, &q, &row_draw, k, w, epsilon, dedup)
}

/// Column-and-row sampling SVD for given column and row draws.
///
/// Row probabilities are the squared row norms of the scaled column sample,
/// which are identical with and without `dedup`.
#[allow(clippy::too_many_arguments)]
pub fn ctsvd_from_draws(
    a: &DenseMatrix,
    col_draw: &SampleDraw,
    dist: &Distribution,
    row_draw: &SampleDraw,
    k: usize,
    c: usize,
    w: usize,
    epsilon: Option<f64>,
    dedup: bool,
) -> Result<SampledFactor> {
    check_common(a, dist, k, c)?;
    let cm = scale_sampled_columns(a.as_mat(), col_draw, dist, c, dedup)?;
    let q = row_norm_distribution(&cm)?;
    ctsvd_inner(&cm, col_draw, &q, row_draw, k, w, epsilon, dedup)
}

#[allow(clippy::too_many_arguments)]
fn ctsvd_inner(
    cm: &DMatrix<f64>,
    col_draw: &SampleDraw,
    q: &Distribution,
    row_draw: &SampleDraw,
    k: usize,
    w: usize,
    epsilon: Option<f64>,
    dedup: bool,
) -> Result<SampledFactor> {
    let wm = if dedup {
        scale_sampled_rows(cm, row_draw, q, w)?
    } else {
        scale_sampled_rows_repeated(cm, row_draw, q, w)?
    };
    let frob_sq = wm.norm_squared();
    let gram = par::gram(&wm);
    let mut factor = factor_from_gram(cm, gram, k, false, (wm.nrows(), wm.ncols()))?;
    if let Some(eps) = epsilon {
        let gamma = eps / (100.0 * k as f64);
        let keep = factor
            .sigma()
            .iter()
            .take_while(|s| *s * *s >= gamma * frob_sq)
            .count();
        factor = factor.truncate(keep);
    }
    Ok(SampledFactor {
        factor,
        requested: k,
        distinct_columns: col_draw.distinct(),
        distinct_rows: Some(row_draw.distinct()),
    })
}
