use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use podsketch::commands::{self, CompareOptions, ConvertOptions, RunOptions};
use podsketch::format::{write_podf_file, write_podm_file};
use podsketch::isma::{Criterion, Finalize, IsmaConfig, Strategy};
use podsketch::report::Algorithm;
use podsketch::{par, synth, PodError};

#[derive(Parser)]
#[command(name = "podsketch", version, about = "Dominant POD modes of large dense matrices by sampling and merging")]
struct Cli {
    /// Worker threads for the dense kernels.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert CSV (or PODM) to PODM, optionally centering each row.
    Convert {
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Subtract each row's mean.
        #[arg(long)]
        center: bool,
    },
    /// Run one algorithm and write a JSON report.
    Run(RunArgs),
    /// Angles between two factors and the residual bound of the second.
    Compare {
        /// Reference factor (PODF) or matrix (PODM/CSV, decomposed exactly).
        first: PathBuf,
        /// Factor under test.
        second: PathBuf,
        #[arg(long)]
        k: usize,
        /// Matrix for the residual bound; defaults to FIRST when it is a matrix.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Write a seeded low-rank-plus-noise test matrix.
    Generate {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        /// Comma-separated singular values of the signal.
        #[arg(long, value_delimiter = ',', required = true)]
        spectrum: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, env = "PODSKETCH_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Gram,
    Ltsvd,
    Ctsvd,
    Isma,
    Incremental,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    L2n,
    Unf,
    Ort,
    Ls,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Modes,
    Subspace,
}

#[derive(Clone, Copy, ValueEnum)]
enum FinalizeArg {
    Auto,
    Always,
    Never,
}

#[derive(Args)]
struct RunArgs {
    #[arg(value_enum)]
    algorithm: AlgorithmArg,
    input: PathBuf,
    #[arg(long)]
    k: usize,
    /// Rank kept after each merge [default: 3k].
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = 0.7)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.6)]
    delta: f64,
    #[arg(long, default_value_t = 0.99)]
    tau: f64,
    #[arg(long, value_enum, default_value_t = StrategyArg::Unf)]
    strategy: StrategyArg,
    /// Sample rows as well as columns.
    #[arg(long)]
    rows: bool,
    #[arg(long, value_enum, default_value_t = CriterionArg::Modes)]
    criterion: CriterionArg,
    #[arg(long, env = "PODSKETCH_SEED", default_value_t = 0)]
    seed: u64,
    /// Column blocks for the incremental algorithm.
    #[arg(long, default_value_t = 1)]
    blocks: usize,
    /// Exact factor (PODF) or matrix (PODM) to measure angles against.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Recompute singular values and right vectors at the end; bare flag means always.
    #[arg(long, value_enum, num_args = 0..=1, default_value_t = FinalizeArg::Auto, default_missing_value = "always")]
    finalize: FinalizeArg,
    /// Columns drawn per round [default: from k, epsilon, delta].
    #[arg(long)]
    columns: Option<usize>,
    /// Rows drawn per round when sampling rows [default: from k, epsilon, delta].
    #[arg(long)]
    row_count: Option<usize>,
    /// Keep duplicated draws instead of collapsing them.
    #[arg(long)]
    no_dedup: bool,
    /// Report path [default: stdout].
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write every kept mode (with right vectors when computed) as PODF.
    #[arg(long)]
    save_factor: Option<PathBuf>,
}

impl RunArgs {
    fn options(&self, threads: usize) -> RunOptions {
        let mut config = IsmaConfig::new(self.k);
        config.r = self.r.unwrap_or(3 * self.k);
        config.epsilon = self.epsilon;
        config.delta = self.delta;
        config.tau = self.tau;
        config.strategy = match self.strategy {
            StrategyArg::L2n => Strategy::L2n,
            StrategyArg::Unf => Strategy::Unf,
            StrategyArg::Ort => Strategy::Ort,
            StrategyArg::Ls => Strategy::Ls,
        };
        config.rows = self.rows;
        config.criterion = match self.criterion {
            CriterionArg::Modes => Criterion::Modes,
            CriterionArg::Subspace => Criterion::Subspace,
        };
        config.seed = self.seed;
        config.finalize = match self.finalize {
            FinalizeArg::Auto => Finalize::Auto,
            FinalizeArg::Always => Finalize::Always,
            FinalizeArg::Never => Finalize::Never,
        };
        config.columns_per_round = self.columns;
        config.rows_per_round = self.row_count;
        RunOptions {
            algorithm: match self.algorithm {
                AlgorithmArg::Gram => Algorithm::Gram,
                AlgorithmArg::Ltsvd => Algorithm::Ltsvd,
                AlgorithmArg::Ctsvd => Algorithm::Ctsvd,
                AlgorithmArg::Isma => Algorithm::Isma,
                AlgorithmArg::Incremental => Algorithm::Incremental,
            },
            input: self.input.clone(),
            config,
            blocks: self.blocks,
            dedup: !self.no_dedup,
            reference: self.reference.clone(),
            threads,
        }
    }
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<(), PodError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| PodError::Io(e.into()))?;
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), PodError> {
    match cli.command {
        Command::Convert { input, out, center } => {
            let s = commands::convert(&ConvertOptions { input, output: out, center })?;
            println!("m = {}\nn = {}\nfrobenius = {}", s.rows, s.cols, s.frobenius);
        }
        Command::Run(args) => {
            let output = commands::run(&args.options(cli.threads))?;
            if let Some(w) = &output.report.wedin {
                if let Some(advice) = &w.advisory {
                    log::warn!("{advice}");
                }
            }
            if let Some(path) = &args.save_factor {
                write_podf_file(path, &output.extended)?;
            }
            emit(&output.report, args.out.as_deref())?;
        }
        Command::Compare { first, second, k, matrix, out } => {
            let report = commands::compare(&CompareOptions { first, second, k, matrix })?;
            if let Some(advice) = report.wedin.as_ref().and_then(|w| w.advisory.as_ref()) {
                log::warn!("{advice}");
            }
            emit(&report, out.as_deref())?;
        }
        Command::Generate { rows, cols, spectrum, noise, seed, out } => {
            if spectrum.len() > rows.min(cols) || spectrum.iter().any(|s| !s.is_finite() || *s < 0.0) {
                return Err(PodError::Parameter(format!(
                    "spectrum needs at most {} finite non-negative values",
                    rows.min(cols)
                )));
            }
            if !noise.is_finite() || noise < 0.0 {
                return Err(PodError::Parameter("noise must be finite and non-negative".into()));
            }
            write_podm_file(&out, &synth::low_rank_plus_noise(rows, cols, &spectrum, noise, seed))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    par::configure_threads(cli.threads);
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
