//! Sampling distributions, seeded draws with replacement, duplicate-free
//! rescaling, and the sample-count formulas.
//!
//! Draws use inverse-CDF lookup (binary search over cumulative weights)
//! driven by [`PodRng`], a ChaCha8 stream seeded from a `u64`. Both choices
//! are part of the reproducibility contract: the same seed and inputs give
//! the same draw on every platform.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PodError, Result};
use crate::par;

/// Generator used for every sampling decision.
pub type PodRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> PodRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Probability vector over a set of candidate indices.
///
/// Indices are kept in ascending order; weights are nonnegative and sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    indices: Vec<usize>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Distribution {
    /// Normalizes nonnegative `scores` attached to distinct `indices`.
    pub fn from_scores(indices: Vec<usize>, scores: Vec<f64>) -> Result<Self> {
        if indices.len() != scores.len() {
            return Err(PodError::shape(format!(
                "{} indices but {} scores",
                indices.len(),
                scores.len()
            )));
        }
        if indices.is_empty() {
            return Err(PodError::param("distribution over an empty candidate set"));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(PodError::param(format!("sampling score {bad} is not a finite nonnegative number")));
        }
        let mut pairs: Vec<(usize, f64)> = indices.into_iter().zip(scores).collect();
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(PodError::param("candidate indices must be distinct"));
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if total <= 0.0 {
            return Err(PodError::DegenerateDistribution(
                "every candidate has zero weight".into(),
            ));
        }
        let (indices, weights): (Vec<usize>, Vec<f64>) =
            pairs.into_iter().map(|(i, s)| (i, s / total)).unzip();

        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        // pin the top of the CDF so a uniform draw in [0, 1) always lands on
        // a positive-weight entry
        let last_positive = weights.iter().rposition(|w| *w > 0.0).expect("total > 0");
        for c in &mut cumulative[last_positive..] {
            *c = 1.0;
        }
        Ok(Distribution {
            indices,
            weights,
            cumulative,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Probability of `index`, or `None` when it is not a candidate.
    pub fn weight_of(&self, index: usize) -> Option<f64> {
        self.indices
            .binary_search(&index)
            .ok()
            .map(|p| self.weights[p])
    }

    fn draw_one<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let x: f64 = rng.random();
        let pos = self.cumulative.partition_point(|&c| c <= x);
        self.indices[pos.min(self.indices.len() - 1)]
    }
}

/// Result of drawing with replacement, collapsed to distinct indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleDraw {
    /// Distinct drawn indices, ascending.
    pub unique_indices: Vec<usize>,
    /// Occurrences of each distinct index.
    pub counts: Vec<usize>,
    /// Number of draws requested.
    pub total: usize,
    /// Raw draws in order.
    pub sequence: Vec<usize>,
}

impl SampleDraw {
    /// Builds a draw from an explicit sequence of indices.
    pub fn from_sequence(sequence: Vec<usize>) -> Self {
        let mut sorted = sequence.clone();
        sorted.sort_unstable();
        let mut unique_indices = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for idx in sorted {
            if unique_indices.last() == Some(&idx) {
                *counts.last_mut().expect("nonempty") += 1;
            } else {
                unique_indices.push(idx);
                counts.push(1);
            }
        }
        SampleDraw {
            unique_indices,
            counts,
            total: sequence.len(),
            sequence,
        }
    }

    /// Number of distinct indices.
    pub fn distinct(&self) -> usize {
        self.unique_indices.len()
    }
}

pub fn uniform_distribution(candidates: &[usize]) -> Result<Distribution> {
    Distribution::from_scores(candidates.to_vec(), vec![1.0; candidates.len()])
}

/// Weights proportional to squared column norms over `candidates`.
pub fn column_norm_distribution(a: &DMatrix<f64>, candidates: &[usize]) -> Result<Distribution> {
    let scores = par::map_range(candidates.len(), |p| a.column(candidates[p]).norm_squared());
    Distribution::from_scores(candidates.to_vec(), scores)
}

/// Weights proportional to squared row norms over every row of `d`.
pub fn row_norm_distribution(d: &DMatrix<f64>) -> Result<Distribution> {
    let mut scores = vec![0.0; d.nrows()];
    for col in d.column_iter() {
        for (s, x) in scores.iter_mut().zip(col.iter()) {
            *s += x * x;
        }
    }
    Distribution::from_scores((0..d.nrows()).collect(), scores)
}

/// Weights proportional to `‖aᵢ − U·Uᵀaᵢ‖²` over `candidates`.
///
/// `u` must have orthonormal columns; with zero columns this is column-norm
/// sampling. Fails with [`PodError::DegenerateDistribution`] when the total
/// residual is below `1e-14·‖A‖_F²`.
pub fn residual_distribution(a: &DMatrix<f64>, u: &DMatrix<f64>, candidates: &[usize]) -> Result<Distribution> {
    if u.nrows() != a.nrows() {
        return Err(PodError::shape(format!(
            "basis has {} rows, matrix has {}",
            u.nrows(),
            a.nrows()
        )));
    }
    let scores = par::map_range(candidates.len(), |p| {
        let col = a.column(candidates[p]);
        if u.ncols() == 0 {
            return col.norm_squared();
        }
        let coeff = u.tr_mul(&col);
        (col - u * coeff).norm_squared()
    });
    let total: f64 = scores.iter().sum();
    let frob_sq: f64 = par::column_sq_norms(a).iter().sum();
    if total <= 1e-14 * frob_sq {
        return Err(PodError::DegenerateDistribution(
            "the current basis captures every remaining column".into(),
        ));
    }
    Distribution::from_scores(candidates.to_vec(), scores)
}

/// Row leverage scores `‖uⁱ‖²/k` of an orthonormal `m × k` basis.
pub fn leverage_distribution(u: &DMatrix<f64>) -> Result<Distribution> {
    let k = u.ncols();
    if k == 0 {
        return Err(PodError::param("leverage scores need at least one basis vector"));
    }
    let mut scores = vec![0.0; u.nrows()];
    for col in u.column_iter() {
        for (s, x) in scores.iter_mut().zip(col.iter()) {
            *s += x * x;
        }
    }
    for s in &mut scores {
        *s /= k as f64;
    }
    Distribution::from_scores((0..u.nrows()).collect(), scores)
}

/// `count` i.i.d. draws from `dist`.
pub fn sample_with_replacement<R: Rng + ?Sized>(dist: &Distribution, count: usize, rng: &mut R) -> Result<SampleDraw> {
    if count == 0 {
        return Err(PodError::param("sample count must be at least 1"));
    }
    let sequence = (0..count).map(|_| dist.draw_one(rng)).collect();
    Ok(SampleDraw::from_sequence(sequence))
}

fn positive_weight(dist: &Distribution, index: usize) -> Result<f64> {
    match dist.weight_of(index) {
        Some(p) if p > 0.0 => Ok(p),
        Some(_) => Err(PodError::param(format!("index {index} was drawn with zero probability"))),
        None => Err(PodError::param(format!("index {index} is not a candidate of the distribution"))),
    }
}

/// Scaled sampled columns.
///
/// With `dedup = false` every draw contributes `a_s/√(c·p_s)` (the matrix
/// `C`). With `dedup = true` each distinct index contributes once, scaled by
/// `√t/√(c·p)` (the matrix `D`), so that `D·Dᵀ = C·Cᵀ`.
pub fn scale_sampled_columns(
    a: &DMatrix<f64>,
    draw: &SampleDraw,
    dist: &Distribution,
    c: usize,
    dedup: bool,
) -> Result<DMatrix<f64>> {
    let m = a.nrows();
    let c = c as f64;
    if dedup {
        let mut out = DMatrix::zeros(m, draw.distinct());
        for (j, (&idx, &t)) in draw.unique_indices.iter().zip(&draw.counts).enumerate() {
            let p = positive_weight(dist, idx)?;
            let scale = (t as f64).sqrt() / (c * p).sqrt();
            out.column_mut(j).copy_from(&(a.column(idx) * scale));
        }
        Ok(out)
    } else {
        let mut out = DMatrix::zeros(m, draw.sequence.len());
        for (j, &idx) in draw.sequence.iter().enumerate() {
            let p = positive_weight(dist, idx)?;
            out.column_mut(j).copy_from(&(a.column(idx) / (c * p).sqrt()));
        }
        Ok(out)
    }
}

/// Distinct sampled rows of `c_mat`, each scaled by `√(t̂/(w·q))` (the matrix `Y`).
///
/// `Yᵀ·Y` equals `Wᵀ·W` for the with-duplicates matrix of
/// [`scale_sampled_rows_repeated`].
pub fn scale_sampled_rows(c_mat: &DMatrix<f64>, draw: &SampleDraw, dist: &Distribution, w: usize) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(draw.distinct(), c_mat.ncols());
    for (i, (&idx, &t)) in draw.unique_indices.iter().zip(&draw.counts).enumerate() {
        let q = positive_weight(dist, idx)?;
        let scale = (t as f64 / (w as f64 * q)).sqrt();
        out.row_mut(i).copy_from(&(c_mat.row(idx) * scale));
    }
    Ok(out)
}

/// One row per draw, each scaled by `1/√(w·q)` (the matrix `W`).
pub fn scale_sampled_rows_repeated(
    c_mat: &DMatrix<f64>,
    draw: &SampleDraw,
    dist: &Distribution,
    w: usize,
) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(draw.sequence.len(), c_mat.ncols());
    for (i, &idx) in draw.sequence.iter().enumerate() {
        let q = positive_weight(dist, idx)?;
        out.row_mut(i).copy_from(&(c_mat.row(idx) / (w as f64 * q).sqrt()));
    }
    Ok(out)
}

fn check_count_params(k: usize, epsilon: f64, delta: f64) -> Result<()> {
    if k == 0 {
        return Err(PodError::param("k must be at least 1"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(PodError::param(format!("epsilon = {epsilon} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PodError::param(format!("delta = {delta} must lie in (0, 1)")));
    }
    Ok(())
}

fn to_count(raw: f64) -> Result<usize> {
    if !raw.is_finite() || raw > usize::MAX as f64 {
        return Err(PodError::param(format!("sample count {raw} is not representable")));
    }
    Ok((raw.ceil() as usize).max(1))
}

/// `4k(1 + √(8 ln(1/δ)))² / ε²` before rounding. Logarithms are natural.
pub fn ltsvd_sample_count_raw(k: usize, epsilon: f64, delta: f64) -> Result<f64> {
    check_count_params(k, epsilon, delta)?;
    let t = 1.0 + (8.0 * (1.0 / delta).ln()).sqrt();
    Ok(4.0 * k as f64 * t * t / (epsilon * epsilon))
}

/// Columns to sample for the single-round column sampler (ceiling of the raw value).
pub fn ltsvd_sample_count(k: usize, epsilon: f64, delta: f64) -> Result<usize> {
    to_count(ltsvd_sample_count_raw(k, epsilon, delta)?)
}

/// `k²(1 + √(ln(2/δ)))² / ε⁴` before rounding. Logarithms are natural.
pub fn ctsvd_sample_count_raw(k: usize, epsilon: f64, delta: f64) -> Result<f64> {
    check_count_params(k, epsilon, delta)?;
    let t = 1.0 + (2.0 / delta).ln().sqrt();
    let k = k as f64;
    Ok(k * k * t * t / epsilon.powi(4))
}

/// Columns and rows to sample for the column-and-row sampler.
pub fn ctsvd_sample_count(k: usize, epsilon: f64, delta: f64) -> Result<usize> {
    to_count(ctsvd_sample_count_raw(k, epsilon, delta)?)
}
