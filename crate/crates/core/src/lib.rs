//! Dominant POD modes (leading left singular vectors) of large dense
//! matrices by iterative column/row sampling with merge-and-truncate
//! updates.
//!
//! The crate is organized bottom-up:
//!
//! * [`matcore`]: matrix storage, dense SVD/QR kernels and the exact
//!   `AᵀA` reference path.
//! * [`sampling`]: sampling distributions, seeded draws and the
//!   duplicate-free rescaling of sampled columns and rows.
//! * [`baselines`]: single-round column (LTSVD) and column-and-row (CTSVD)
//!   samplers.
//! * [`merge`]: merge-and-truncate of two truncated factors, chains of
//!   merges, and the associated error bound.
//! * [`isma`]: the iterative sampling-and-merging driver, with or without row sampling.
//! * [`quality`]: mode angles, principal angles and the Wedin measure.
//! * [`ooc`]: the PODM block reader and one-pass incremental POD.
//! * [`format`], [`report`], [`commands`]: file formats and the command
//!   layer behind the `podsketch` binary.
//!
//! Dense kernels in [`par`] run on rayon when the `parallel` feature is on
//! (the default) and sequentially otherwise; results are identical either way.
//!
//! ```
//! use podsketch::isma::{isma_run, IsmaConfig, Strategy};
//! use podsketch::matcore::dense_svd;
//! use podsketch::quality::principal_angles;
//! use podsketch::synth::low_rank_plus_noise;
//!
//! # fn main() -> podsketch::Result<()> {
//! let a = low_rank_plus_noise(400, 3000, &[10.0, 7.0, 4.0], 0.002, 1);
//! let mut cfg = IsmaConfig::new(3);
//! cfg.strategy = Strategy::Ort;
//! cfg.seed = 42;
//! let out = isma_run(&a, &cfg)?;
//! let exact = dense_svd(&a)?;
//! let angles = principal_angles(&exact, &out.factor, 3)?;
//! assert!(angles.iter().all(|&t| t < 5.0));
//! # Ok(())
//! # }
//! ```

pub mod baselines;
pub mod commands;
pub mod error;
pub mod format;
pub mod isma;
pub mod matcore;
pub mod merge;
pub mod ooc;
pub mod par;
pub mod quality;
pub mod report;
pub mod sampling;
pub mod synth;

pub use error::{PodError, Result};
pub use matcore::{DenseMatrix, TruncatedFactor};
