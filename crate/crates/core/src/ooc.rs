//! One-pass incremental POD over PODM files too large to load at once.
//!
//! The file is read as `t` contiguous column blocks. Each block is reduced
//! with the iterative sampler and folded into a running factor with
//! [`block_merge`]; only one block is resident at a time.

use std::fs::File;
use std::io::{BufReader, Read};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::ltsvd;
use crate::error::{PodError, Result};
use crate::format::{PodmHeader, Tracked, HEADER_LEN};
use crate::isma::{isma_run_with_rng, Finalize, IsmaConfig, IterationTrace};
use crate::matcore::{DenseMatrix, TruncatedFactor};
use crate::merge::block_merge;
use crate::sampling::{column_norm_distribution, seeded_rng};

/// Columns `⌊i·n/t⌋ .. ⌊(i+1)·n/t⌋` of block `i`.
pub fn block_bounds(n: usize, t: usize, i: usize) -> Range<usize> {
    let edge = |j: usize| ((j as u128 * n as u128) / t as u128) as usize;
    edge(i)..edge(i + 1)
}

/// Sequential reader of the column blocks of a PODM stream.
pub struct BlockReader<R> {
    source: Tracked<R>,
    header: PodmHeader,
    blocks: usize,
    cursor: usize,
    reads: usize,
}

impl BlockReader<BufReader<File>> {
    pub fn open(path: &Path, blocks: usize) -> Result<Self> {
        BlockReader::new(BufReader::new(File::open(path)?), blocks)
    }
}

impl<R: Read> BlockReader<R> {
    /// Reads the header of `source` and prepares to yield `blocks` blocks.
    pub fn new(source: R, blocks: usize) -> Result<Self> {
        let mut source = Tracked::new(source, 0);
        let header = source.header()?;
        debug_assert_eq!(source.offset, HEADER_LEN);
        if blocks == 0 || blocks > header.cols {
            return Err(PodError::param(format!(
                "block count {blocks} must lie in 1..={}",
                header.cols
            )));
        }
        Ok(BlockReader {
            source,
            header,
            blocks,
            cursor: 0,
            reads: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.header.rows
    }

    pub fn cols(&self) -> usize {
        self.header.cols
    }

    pub fn block_count(&self) -> usize {
        self.blocks
    }

    /// Index of the next block to be read.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Blocks read so far.
    pub fn reads(&self) -> usize {
        self.reads
    }

    pub fn block_range(&self, i: usize) -> Range<usize> {
        block_bounds(self.header.cols, self.blocks, i)
    }

    /// Gives back the underlying source.
    pub fn into_inner(self) -> R {
        self.source.inner
    }

    /// Next block, or `None` once every block has been read.
    pub fn read_block(&mut self) -> Result<Option<DenseMatrix>> {
        if self.cursor == self.blocks {
            return Ok(None);
        }
        let range = self.block_range(self.cursor);
        let m = self.header.rows;
        let mut data = vec![0.0; m * range.len()];
        let data_at = self.source.offset;
        self.source.f64s(&mut data)?;
        let block = DenseMatrix::from_column_major(m, range.len(), data).map_err(|e| match e {
            PodError::NonFinite { row, col } => PodError::format(
                data_at + 8 * (col as u64 * m as u64 + row as u64),
                format!("non-finite value at row {row}, column {}", range.start + col),
            ),
            other => other,
        })?;
        self.cursor += 1;
        self.reads += 1;
        Ok(Some(block))
    }
}

/// Per-block summary of an incremental run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub columns: usize,
    pub traces: Vec<IterationTrace>,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct IncrementalOutcome {
    /// Leading `k` modes (no `v`).
    pub factor: TruncatedFactor,
    /// Every mode kept by the last merge.
    pub working: TruncatedFactor,
    pub blocks: Vec<BlockSummary>,
}

/// Per-block iterative sampling followed by a left-to-right merge.
///
/// Every block uses the sample counts of the full-matrix configuration and
/// draws from one generator seeded with `config.seed`, so `t = 1`
/// reproduces an in-memory run without refinement exactly. Blocks narrower
/// than `k` contribute fewer modes.
pub fn incremental_pod<R: Read>(reader: &mut BlockReader<R>, config: &IsmaConfig) -> Result<IncrementalOutcome> {
    config.validate(reader.rows(), reader.cols())?;
    let mut block_cfg = config.clone();
    block_cfg.finalize = Finalize::Never;
    block_cfg.columns_per_round = Some(config.columns_per_round()?);
    block_cfg.rows_per_round = Some(config.rows_per_round()?);
    let mut rng = seeded_rng(config.seed);

    let mut acc: Option<TruncatedFactor> = None;
    let mut blocks = Vec::with_capacity(reader.block_count());
    while let Some(block) = reader.read_block()? {
        let mut cfg = block_cfg.clone();
        cfg.k = config.k.min(block.rows()).min(block.cols());
        let out = isma_run_with_rng(&block, &cfg, &mut rng)?;
        blocks.push(BlockSummary {
            columns: block.cols(),
            traces: out.traces,
            converged: out.converged,
        });
        drop(block);
        acc = Some(match acc {
            None => out.working,
            Some(prev) => block_merge(&prev, &out.working, config.r)?,
        });
    }
    let working = acc.expect("a reader yields at least one block");
    Ok(IncrementalOutcome {
        factor: working.truncate(config.k),
        working,
        blocks,
    })
}

/// Column-sampling variant: each block gets `⌈c/t⌉` sampled columns and
/// contributes up to `r` modes.
pub fn incremental_ltsvd<R: Read>(
    reader: &mut BlockReader<R>,
    k: usize,
    r: usize,
    c: usize,
    seed: u64,
) -> Result<TruncatedFactor> {
    if k == 0 || r < k || k > reader.rows().min(reader.cols()) {
        return Err(PodError::param(format!("need 1 <= k <= r and k <= min(m, n); got k = {k}, r = {r}")));
    }
    let per_block = c.div_ceil(reader.block_count()).max(1);
    let mut rng = seeded_rng(seed);
    let mut acc: Option<TruncatedFactor> = None;
    while let Some(block) = reader.read_block()? {
        let all: Vec<usize> = (0..block.cols()).collect();
        let dist = column_norm_distribution(block.as_mat(), &all)?;
        let modes = r.min(block.rows()).min(block.cols());
        let f = ltsvd(&block, &dist, modes, per_block, &mut rng, true)?.factor;
        acc = Some(match acc {
            None => f,
            Some(prev) => block_merge(&prev, &f, r)?,
        });
    }
    Ok(acc.expect("a reader yields at least one block").truncate(k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    /// The whole matrix is revisited every round.
    InMemory,
    /// Blocks are read once and merged.
    Incremental,
}

/// Full passes over the matrix: `i + 1` for column sampling, at most
/// `3i + 1` with row sampling, and 1 for the incremental mode.
pub fn pass_count(mode: RunMode, rows: bool, iterations: usize) -> usize {
    match (mode, rows) {
        (RunMode::Incremental, _) => 1,
        (RunMode::InMemory, false) => iterations + 1,
        (RunMode::InMemory, true) => 3 * iterations + 1,
    }
}
