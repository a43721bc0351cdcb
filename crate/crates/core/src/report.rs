//! JSON run reports written by the command-line tool.
//!
//! Everything except `timing` is a deterministic function of the input and
//! the configuration, so two reports can be compared after dropping it.

use serde::{Deserialize, Serialize};

use crate::isma::{Criterion, Finalize, IterationTrace, Strategy};
use crate::quality::WedinReport;

/// JSON Schema (draft 2020-12) describing [`RunReport`].
pub const RUN_REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Gram,
    Ltsvd,
    Ctsvd,
    Isma,
    Incremental,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub algorithm: Algorithm,
    pub input: String,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub tau: f64,
    pub strategy: Strategy,
    pub row_sampling: bool,
    pub criterion: Criterion,
    pub seed: u64,
    pub finalize: Finalize,
    pub blocks: usize,
    pub dedup: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns_per_round: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows_per_round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Block index for incremental runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
    #[serde(flatten)]
    pub trace: IterationTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    /// Per-mode angles in degrees.
    pub mode: Vec<f64>,
    /// Principal angles in degrees, ascending.
    pub principal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedinSection {
    #[serde(flatten)]
    pub report: WedinReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advisory: Option<String>,
}

impl From<WedinReport> for WedinSection {
    fn from(report: WedinReport) -> Self {
        let advisory = report.advisory().map(str::to_owned);
        WedinSection { report, advisory }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    /// User plus system CPU time of the process, where the platform reports it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpu_seconds: Option<f64>,
    pub round_seconds: Vec<f64>,
    pub threads: usize,
    /// Flop count of an exact merge-based decomposition, for comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimated_flops: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    pub sigma: Vec<f64>,
    pub traces: Vec<TraceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Angles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wedin: Option<WedinSection>,
    pub timing: Timing,
    pub passes: usize,
}

/// Output of `compare`: angles between two factors and, when a matrix is
/// available, the residual bound of the second one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub k: usize,
    pub angles: Angles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wedin: Option<WedinSection>,
}

/// CPU time consumed by this process so far.
#[cfg(unix)]
pub fn process_cpu_seconds() -> Option<f64> {
    let mut usage = std::mem::MaybeUninit::<libc::rusage>::uninit();
    // SAFETY: getrusage fills the struct on success and we only read it then.
    let rc = unsafe { libc::getrusage(libc::RUSAGE_SELF, usage.as_mut_ptr()) };
    if rc != 0 {
        return None;
    }
    let usage = unsafe { usage.assume_init() };
    let secs = |t: libc::timeval| t.tv_sec as f64 + t.tv_usec as f64 * 1e-6;
    Some(secs(usage.ru_utime) + secs(usage.ru_stime))
}

#[cfg(not(unix))]
pub fn process_cpu_seconds() -> Option<f64> {
    None
}
