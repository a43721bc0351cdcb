//! The operations behind the `podsketch` binary: conversion, runs and
//! comparisons. Argument parsing lives in the binary; everything here takes
//! plain option structs so it can be tested without a process boundary.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::baselines::{ctsvd, ltsvd};
use crate::error::{PodError, Result};
use crate::format::{read_csv_file, read_podf_file, read_podm_file, read_podm_header, write_podm_file, HEADER_LEN, MAGIC};
use crate::isma::{isma_run, IsmaConfig};
use crate::matcore::{dense_svd, mean_center_rows, pod_via_gram, DenseMatrix, TruncatedFactor};
use crate::merge::mat_flops_estimate;
use crate::ooc::{incremental_pod, pass_count, BlockReader, RunMode};
use crate::quality::{mode_angles, principal_angles, wedin_measure};
use crate::report::{
    process_cpu_seconds, Algorithm, Angles, CompareReport, ConfigEcho, RunReport, Timing, TraceEntry, WedinSection,
};
use crate::sampling::{column_norm_distribution, seeded_rng};

fn starts_with_magic(path: &Path) -> Result<bool> {
    let mut head = [0u8; 4];
    let mut f = File::open(path)?;
    let mut got = 0;
    while got < 4 {
        match f.read(&mut head[got..])? {
            0 => break,
            n => got += n,
        }
    }
    Ok(got == 4 && &head == MAGIC)
}

/// Reads a PODM file, or CSV when the file does not start with the PODM magic.
pub fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    if starts_with_magic(path)? {
        read_podm_file(path)
    } else {
        read_csv_file(path)
    }
}

/// Reads a factor from a PODF file, or computes the exact one when `path`
/// holds a plain PODM matrix.
pub fn load_factor(path: &Path) -> Result<TruncatedFactor> {
    if starts_with_magic(path)? {
        let header = read_podm_header(File::open(path)?)?;
        if std::fs::metadata(path)?.len() == HEADER_LEN + header.data_len() {
            return dense_svd(&read_podm_file(path)?);
        }
        return read_podf_file(path);
    }
    dense_svd(&read_csv_file(path)?)
}

#[derive(Debug, Clone)]
pub struct ConvertOptions {
    pub input: PathBuf,
    pub output: PathBuf,
    pub center: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvertSummary {
    pub rows: usize,
    pub cols: usize,
    pub frobenius: f64,
}

/// Writes the input (CSV or PODM) as PODM, optionally row-centered.
pub fn convert(opts: &ConvertOptions) -> Result<ConvertSummary> {
    let mut a = load_matrix(&opts.input)?;
    if opts.center {
        a = mean_center_rows(&a);
    }
    write_podm_file(&opts.output, &a)?;
    Ok(ConvertSummary {
        rows: a.rows(),
        cols: a.cols(),
        frobenius: a.frobenius_norm(),
    })
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub algorithm: Algorithm,
    pub input: PathBuf,
    pub config: IsmaConfig,
    /// Column blocks for the incremental algorithm.
    pub blocks: usize,
    pub dedup: bool,
    pub reference: Option<PathBuf>,
    /// Recorded in the report; the caller sizes the thread pool.
    pub threads: usize,
}

/// A finished run: the report plus the computed factors.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    /// Leading `k` modes.
    pub factor: TruncatedFactor,
    /// Every mode the algorithm kept (up to `r`, or `k + 1` for `gram`),
    /// with right vectors when they were computed.
    pub extended: TruncatedFactor,
}

struct Computed {
    factor: TruncatedFactor,
    extended: TruncatedFactor,
    traces: Vec<TraceEntry>,
    round_seconds: Vec<f64>,
    passes: usize,
}

fn untraced(factor: TruncatedFactor, passes: usize) -> Computed {
    Computed {
        extended: factor.clone(),
        factor,
        traces: Vec::new(),
        round_seconds: Vec::new(),
        passes,
    }
}

fn compute_in_memory(a: &DenseMatrix, opts: &RunOptions) -> Result<Computed> {
    let cfg = &opts.config;
    let k = cfg.k;
    let all: Vec<usize> = (0..a.cols()).collect();
    match opts.algorithm {
        Algorithm::Gram => {
            let modes = (k + 1).min(a.rows().min(a.cols()));
            let full = pod_via_gram(a, modes)?;
            let mut out = untraced(full.truncate(k), 2);
            out.extended = full;
            Ok(out)
        }
        Algorithm::Ltsvd => {
            let dist = column_norm_distribution(a.as_mat(), &all)?;
            let mut rng = seeded_rng(cfg.seed);
            let out = ltsvd(a, &dist, k, cfg.columns_per_round()?, &mut rng, opts.dedup)?;
            Ok(untraced(out.factor, 1))
        }
        Algorithm::Ctsvd => {
            let dist = column_norm_distribution(a.as_mat(), &all)?;
            let mut rng = seeded_rng(cfg.seed);
            let c = cfg.columns_per_round()?;
            let w = cfg.rows_per_round()?;
            let out = ctsvd(a, &dist, k, c, w, Some(cfg.epsilon), &mut rng, opts.dedup)?;
            Ok(untraced(out.factor, 1))
        }
        Algorithm::Isma => {
            let out = isma_run(a, cfg)?;
            let passes = pass_count(RunMode::InMemory, cfg.rows, out.iterations()) + usize::from(out.finalized);
            Ok(Computed {
                factor: out.factor,
                extended: out.working,
                traces: out
                    .traces
                    .into_iter()
                    .map(|trace| TraceEntry { block: None, trace })
                    .collect(),
                round_seconds: out.round_seconds,
                passes,
            })
        }
        Algorithm::Incremental => unreachable!("incremental runs stream from disk"),
    }
}

/// Runs one algorithm on the matrix at `opts.input`.
///
/// The incremental algorithm streams a PODM file block by block; the others
/// load the matrix (PODM or CSV). With a reference, mode and principal angles
/// against it are added. The residual bound is added whenever the algorithm
/// produces right vectors and at least one mode beyond `k`.
pub fn run(opts: &RunOptions) -> Result<RunOutput> {
    let start = Instant::now();
    let cpu_start = process_cpu_seconds();
    let cfg = &opts.config;
    if opts.blocks == 0 {
        return Err(PodError::param("blocks must be at least 1"));
    }

    let (m, n, computed, wedin) = if opts.algorithm == Algorithm::Incremental {
        let mut reader = BlockReader::open(&opts.input, opts.blocks)?;
        let (m, n) = (reader.rows(), reader.cols());
        let out = incremental_pod(&mut reader, cfg)?;
        let traces = out
            .blocks
            .into_iter()
            .enumerate()
            .flat_map(|(i, b)| b.traces.into_iter().map(move |trace| TraceEntry { block: Some(i), trace }))
            .collect();
        let computed = Computed {
            factor: out.factor,
            extended: out.working,
            traces,
            round_seconds: Vec::new(),
            passes: pass_count(RunMode::Incremental, cfg.rows, 0),
        };
        (m, n, computed, None)
    } else {
        let a = load_matrix(&opts.input)?;
        cfg.validate(a.rows(), a.cols())?;
        let computed = compute_in_memory(&a, opts)?;
        let ext = &computed.extended;
        let wedin = if ext.v().is_some() && ext.rank() > cfg.k {
            Some(WedinSection::from(wedin_measure(&a, ext, cfg.k)?))
        } else {
            None
        };
        (a.rows(), a.cols(), computed, wedin)
    };

    let angles = match &opts.reference {
        Some(path) => {
            let reference = load_factor(path)?;
            Some(angles_between(&reference, &computed.factor, cfg.k)?)
        }
        None => None,
    };

    let report = RunReport {
        config: ConfigEcho {
            algorithm: opts.algorithm,
            input: opts.input.display().to_string(),
            m,
            n,
            k: cfg.k,
            r: cfg.r,
            epsilon: cfg.epsilon,
            delta: cfg.delta,
            tau: cfg.tau,
            strategy: cfg.strategy,
            row_sampling: cfg.rows,
            criterion: cfg.criterion,
            seed: cfg.seed,
            finalize: cfg.finalize,
            blocks: opts.blocks,
            dedup: opts.dedup,
            columns_per_round: cfg.columns_per_round,
            rows_per_round: cfg.rows_per_round,
        },
        sigma: computed.factor.sigma().iter().copied().collect(),
        traces: computed.traces,
        angles,
        wedin,
        timing: Timing {
            wall_seconds: start.elapsed().as_secs_f64(),
            cpu_seconds: cpu_start.zip(process_cpu_seconds()).map(|(a, b)| (b - a).max(0.0)),
            round_seconds: computed.round_seconds,
            threads: opts.threads,
            estimated_flops: mat_flops_estimate(m as u64, n as u64, opts.blocks as u64).ok(),
        },
        passes: computed.passes,
    };
    Ok(RunOutput {
        report,
        factor: computed.factor,
        extended: computed.extended,
    })
}

fn angles_between(reference: &TruncatedFactor, approx: &TruncatedFactor, k: usize) -> Result<Angles> {
    Ok(Angles {
        mode: mode_angles(reference, approx, k)?,
        principal: principal_angles(reference, approx, k)?,
    })
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    /// Reference: a PODF factor or a PODM/CSV matrix (decomposed exactly).
    pub first: PathBuf,
    /// Factor under test (PODF, or a matrix decomposed exactly).
    pub second: PathBuf,
    pub k: usize,
    /// Matrix for the residual bound; defaults to `first` when that is a matrix.
    pub matrix: Option<PathBuf>,
}

fn is_plain_matrix(path: &Path) -> Result<bool> {
    if !starts_with_magic(path)? {
        return Ok(true);
    }
    let header = read_podm_header(File::open(path)?)?;
    Ok(std::fs::metadata(path)?.len() == HEADER_LEN + header.data_len())
}

/// Angles of `second` against `first`, plus the residual bound of `second`
/// when a matrix is at hand and `second` carries `v` and `k + 1` modes.
pub fn compare(opts: &CompareOptions) -> Result<CompareReport> {
    let first = load_factor(&opts.first)?;
    let second = load_factor(&opts.second)?;
    let angles = angles_between(&first, &second, opts.k)?;
    let matrix_path = match &opts.matrix {
        Some(p) => Some(p.clone()),
        None => is_plain_matrix(&opts.first)?.then(|| opts.first.clone()),
    };
    let wedin = match matrix_path {
        Some(p) if second.v().is_some() && second.rank() > opts.k => {
            let a = load_matrix(&p)?;
            Some(WedinSection::from(wedin_measure(&a, &second, opts.k)?))
        }
        _ => None,
    };
    Ok(CompareReport {
        k: opts.k,
        angles,
        wedin,
    })
}
