//! Iterative sampling and merging, with columns only or with columns and
//! rows.
//!
//! A first round samples columns by norm, later rounds sample from the
//! columns not yet seen under one of four strategies and fold the new modes
//! into the running factor with [`block_merge`]. The loop stops when the
//! leading `k` modes (or their span) stop moving, or when every column has
//! been used.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PodError, Result};
use crate::matcore::{factor_from_gram, orthonormalize, qr_parts, svd_parts, DenseMatrix, TruncatedFactor};
use crate::merge::block_merge;
use crate::par;
use crate::sampling::{
    column_norm_distribution, ctsvd_sample_count, leverage_distribution, ltsvd_sample_count,
    residual_distribution, row_norm_distribution, sample_with_replacement, scale_sampled_rows, seeded_rng,
    uniform_distribution, Distribution,
};

/// How columns are drawn after the first round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Original squared column norms, renormalized over the unused columns.
    L2n,
    /// Uniform over the unused columns.
    Unf,
    /// Squared norms of the residual against the current basis.
    Ort,
    /// Uniform columns; rows by leverage scores of the current modes.
    Ls,
}

/// What "stopped moving" means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// `|ũᵢᵀûᵢ| ≥ τ` for every one of the top `k` modes.
    Modes,
    /// Every principal cosine between the old and new top-`k` spans `≥ τ`.
    Subspace,
}

/// When to recompute `Σ` and `V` with one extra pass over the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Finalize {
    /// Only when the loop converged while unused columns remained.
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsmaConfig {
    pub k: usize,
    /// Rank kept after every merge.
    pub r: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub tau: f64,
    pub strategy: Strategy,
    /// Sample rows of every column sample as well.
    pub rows: bool,
    pub criterion: Criterion,
    pub seed: u64,
    pub finalize: Finalize,
    /// Columns drawn per round; defaults to the column-sampling count for `(k, ε, δ)`.
    pub columns_per_round: Option<usize>,
    /// Rows drawn per round; defaults to the column-and-row-sampling count for `(k, ε, δ)`.
    pub rows_per_round: Option<usize>,
}

impl IsmaConfig {
    /// Defaults: `r = 3k`, `ε = 0.7`, `δ = 0.6`, `τ = 0.99`, uniform
    /// resampling, no row sampling, mode criterion, seed 0.
    pub fn new(k: usize) -> Self {
        IsmaConfig {
            k,
            r: 3 * k,
            epsilon: 0.7,
            delta: 0.6,
            tau: 0.99,
            strategy: Strategy::Unf,
            rows: false,
            criterion: Criterion::Modes,
            seed: 0,
            finalize: Finalize::Auto,
            columns_per_round: None,
            rows_per_round: None,
        }
    }

    /// Checks the configuration against an `m × n` input.
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        let limit = m.min(n);
        if self.k == 0 || self.k > limit {
            return Err(PodError::param(format!("k = {} must lie in 1..={limit}", self.k)));
        }
        if self.r < self.k {
            return Err(PodError::param(format!("r = {} must be at least k = {}", self.r, self.k)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(PodError::param(format!("tau = {} must lie in [0, 1]", self.tau)));
        }
        if self.strategy == Strategy::Ls && !self.rows {
            return Err(PodError::param("the leverage-score strategy samples rows; enable row sampling"));
        }
        if self.columns_per_round == Some(0) || self.rows_per_round == Some(0) {
            return Err(PodError::param("per-round sample counts must be at least 1"));
        }
        self.columns_per_round()?;
        self.rows_per_round()?;
        Ok(())
    }

    pub fn columns_per_round(&self) -> Result<usize> {
        match self.columns_per_round {
            Some(c) => Ok(c),
            None => ltsvd_sample_count(self.k, self.epsilon, self.delta),
        }
    }

    pub fn rows_per_round(&self) -> Result<usize> {
        match self.rows_per_round {
            Some(w) => Ok(w),
            None => ctsvd_sample_count(self.k, self.epsilon, self.delta),
        }
    }
}

/// Diagnostics of one round. Round 0 is the initial sample; its cosines are 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    /// Distinct columns drawn this round.
    pub columns_sampled: usize,
    /// Distinct rows drawn this round (0 without row sampling).
    pub rows_sampled: usize,
    /// Unused columns after this round.
    pub remaining: usize,
    pub cosines: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct IsmaOutcome {
    /// Leading `k` modes; `v` present iff `finalized`.
    pub factor: TruncatedFactor,
    /// All modes kept by the last merge (up to `r`), refined alongside `factor`.
    pub working: TruncatedFactor,
    pub traces: Vec<IterationTrace>,
    /// Wall time of each round in seconds, parallel to `traces`.
    pub round_seconds: Vec<f64>,
    pub converged: bool,
    pub exhausted: bool,
    pub finalized: bool,
}

impl IsmaOutcome {
    /// Rounds after the first one.
    pub fn iterations(&self) -> usize {
        self.traces.len().saturating_sub(1)
    }
}

/// Result of one [`get_update`] call.
#[derive(Debug, Clone)]
pub struct Update {
    /// Up to `r` modes of the sampled columns.
    pub factor: TruncatedFactor,
    /// Candidates left after removing the drawn columns.
    pub remaining: Vec<usize>,
    pub distinct_columns: usize,
    pub distinct_rows: usize,
}

/// Row weights used when an update samples rows.
#[derive(Debug, Clone, Copy)]
pub enum RowWeights<'a> {
    /// Squared row norms of the sampled columns.
    Norms,
    /// Leverage scores of this orthonormal basis.
    Leverage(&'a DMatrix<f64>),
}

/// Draws `c` columns from `dist` (a distribution over the sorted candidate
/// set `s`), removes the distinct ones from `s`, and returns up to `r` modes
/// of the unscaled distinct columns `D`.
///
/// With `rows = Some((w, weights))` the right vectors come from `w` sampled,
/// de-duplicated and rescaled rows of `D` instead of `D` itself. Returns
/// `None` when `s` is empty.
pub fn get_update<R: Rng + ?Sized>(
    a: &DenseMatrix,
    s: &[usize],
    dist: &Distribution,
    c: usize,
    rows: Option<(usize, RowWeights<'_>)>,
    r: usize,
    rng: &mut R,
) -> Result<Option<Update>> {
    if s.is_empty() {
        return Ok(None);
    }
    let draw = sample_with_replacement(dist, c, rng)?;
    if let Some(&bad) = draw.unique_indices.iter().find(|i| s.binary_search(i).is_err()) {
        return Err(PodError::param(format!("column {bad} was drawn but is not an unused candidate")));
    }
    let d = a.select_columns(&draw.unique_indices);
    let remaining: Vec<usize> = s
        .iter()
        .copied()
        .filter(|i| draw.unique_indices.binary_search(i).is_err())
        .collect();

    let (factor, distinct_rows) = match rows {
        None => (factor_from_gram(&d, par::gram(&d), r, false, d.shape())?, 0),
        Some((w, weights)) => {
            let q = match weights {
                RowWeights::Norms => row_norm_distribution(&d)?,
                RowWeights::Leverage(u) => leverage_distribution(u)?,
            };
            let row_draw = sample_with_replacement(&q, w, rng)?;
            let y = scale_sampled_rows(&d, &row_draw, &q, w)?;
            let f = factor_from_gram(&d, par::gram(&y), r, false, y.shape())?;
            (f, row_draw.distinct())
        }
    };
    Ok(Some(Update {
        factor,
        remaining,
        distinct_columns: draw.distinct(),
        distinct_rows,
    }))
}

/// Cosines between the leading `k` modes of two factors.
///
/// Missing modes count as cosine 0.
pub fn convergence_cosines(
    prev: &TruncatedFactor,
    next: &TruncatedFactor,
    k: usize,
    criterion: Criterion,
) -> Result<Vec<f64>> {
    if prev.rows() != next.rows() {
        return Err(PodError::shape("factors have different row counts"));
    }
    let kk = k.min(prev.rank()).min(next.rank());
    let mut out = vec![0.0; k];
    match criterion {
        Criterion::Modes => {
            for (i, x) in out.iter_mut().enumerate().take(kk) {
                *x = prev.u().column(i).dot(&next.u().column(i)).abs().min(1.0);
            }
        }
        Criterion::Subspace => {
            let cross = prev.u().columns(0, kk).tr_mul(&next.u().columns(0, kk));
            let (_, s, _) = svd_parts(&cross)?;
            for (x, c) in out.iter_mut().zip(s.iter()) {
                *x = c.clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}

/// Runs the iteration with a generator seeded from `config.seed`.
pub fn isma_run(a: &DenseMatrix, config: &IsmaConfig) -> Result<IsmaOutcome> {
    isma_run_with_rng(a, config, &mut seeded_rng(config.seed))
}

/// Runs the iteration drawing from `rng`; `config.seed` is ignored.
pub fn isma_run_with_rng<R: Rng + ?Sized>(a: &DenseMatrix, config: &IsmaConfig, rng: &mut R) -> Result<IsmaOutcome> {
    config.validate(a.rows(), a.cols())?;
    let (k, r) = (config.k, config.r);
    let c = config.columns_per_round()?;
    let w = if config.rows { Some(config.rows_per_round()?) } else { None };
    let all: Vec<usize> = (0..a.cols()).collect();
    let col_scores = par::column_sq_norms(a.as_mat());

    let mut traces = Vec::new();
    let mut round_seconds = Vec::new();

    let started = Instant::now();
    let first_dist = column_norm_distribution(a.as_mat(), &all)?;
    let first = get_update(a, &all, &first_dist, c, w.map(|w| (w, RowWeights::Norms)), r, rng)?
        .expect("the candidate set is nonempty");
    // Orthonormalize ŨΣ̃ so Ũ is an exact orthonormal basis and Σ̃ stays
    // consistent with it; row-sampled modes are only roughly orthonormal.
    let mut current = if first.factor.is_empty() {
        first.factor
    } else {
        let (u, s) = orthonormalize(&(first.factor.u() * DMatrix::from_diagonal(first.factor.sigma())))?;
        let mut f = drop_zero_modes(u, s)?;
        f.canonicalize_signs();
        f
    };
    let mut remaining = first.remaining;
    traces.push(IterationTrace {
        iteration: 0,
        columns_sampled: first.distinct_columns,
        rows_sampled: first.distinct_rows,
        remaining: remaining.len(),
        cosines: vec![0.0; k],
    });
    round_seconds.push(started.elapsed().as_secs_f64());

    let mut converged = false;
    // At least one refinement round runs whenever columns remain.
    while !remaining.is_empty() {
        let started = Instant::now();
        let dist = match config.strategy {
            Strategy::L2n => {
                let scores = remaining.iter().map(|&i| col_scores[i]).collect();
                or_uniform(Distribution::from_scores(remaining.clone(), scores), &remaining)?
            }
            Strategy::Unf | Strategy::Ls => uniform_distribution(&remaining)?,
            Strategy::Ort => or_uniform(residual_distribution(a.as_mat(), current.u(), &remaining), &remaining)?,
        };
        let leverage_basis;
        let rows = match (w, config.strategy) {
            (None, _) => None,
            (Some(w), Strategy::Ls) if current.rank() > 0 => {
                leverage_basis = current.u().columns(0, k.min(current.rank())).into_owned();
                Some((w, RowWeights::Leverage(&leverage_basis)))
            }
            (Some(w), _) => Some((w, RowWeights::Norms)),
        };
        let update = get_update(a, &remaining, &dist, c, rows, r, rng)?.expect("the candidate set is nonempty");
        let merged = block_merge(&current, &update.factor, r)?;
        let cosines = convergence_cosines(&current, &merged, k, config.criterion)?;
        current = merged;
        remaining = update.remaining;
        let iteration = traces.len();
        log::debug!(
            "round {iteration}: {} new columns, {} left, min cosine {:.6}",
            update.distinct_columns,
            remaining.len(),
            cosines.iter().copied().fold(1.0, f64::min)
        );
        converged = cosines.iter().all(|&x| x >= config.tau);
        traces.push(IterationTrace {
            iteration,
            columns_sampled: update.distinct_columns,
            rows_sampled: update.distinct_rows,
            remaining: remaining.len(),
            cosines,
        });
        round_seconds.push(started.elapsed().as_secs_f64());
        if converged {
            break;
        }
    }
    let exhausted = remaining.is_empty();

    let finalize = match config.finalize {
        Finalize::Always => true,
        Finalize::Never => false,
        Finalize::Auto => converged && !exhausted,
    };
    let working = if finalize && !current.is_empty() {
        refine(a, &current)?
    } else {
        current
    };
    Ok(IsmaOutcome {
        factor: working.truncate(k),
        working,
        traces,
        round_seconds,
        converged,
        exhausted,
        finalized: finalize,
    })
}

fn or_uniform(dist: Result<Distribution>, candidates: &[usize]) -> Result<Distribution> {
    match dist {
        Err(PodError::DegenerateDistribution(why)) => {
            log::debug!("falling back to uniform sampling: {why}");
            uniform_distribution(candidates)
        }
        other => other,
    }
}

fn drop_zero_modes(u: DMatrix<f64>, s: DVector<f64>) -> Result<TruncatedFactor> {
    let top = s.iter().copied().next().unwrap_or(0.0);
    let keep = s.iter().take_while(|&&x| top > 0.0 && x > 1e-14 * top).count();
    TruncatedFactor::new(
        u.columns(0, keep).into_owned(),
        s.rows(0, keep).into_owned(),
        None,
    )
}

/// Exact SVD of the projection `ŨŨᵀA`: QR of `AᵀŨ`, then an SVD of its `R`.
///
/// Returns `(ŨV_R, Σ_R, QU_R)` with zero modes dropped.
pub fn refine(a: &DenseMatrix, basis: &TruncatedFactor) -> Result<TruncatedFactor> {
    if basis.rows() != a.rows() {
        return Err(PodError::shape("basis and matrix have different row counts"));
    }
    let at_u = par::tr_mul(a.as_mat(), basis.u());
    let (q, rr) = qr_parts(&at_u);
    let (ur, s, vr) = svd_parts(&rr)?;
    let top = s.iter().copied().next().unwrap_or(0.0);
    let keep = s.iter().take_while(|&&x| top > 0.0 && x > 1e-14 * top).count();
    let u = par::mul(basis.u(), &vr.columns(0, keep).into_owned());
    let v = par::mul(&q, &ur.columns(0, keep).into_owned());
    let mut f = TruncatedFactor::new(u, s.rows(0, keep).into_owned(), Some(v))?;
    f.canonicalize_signs();
    Ok(f)
}
