//! Lower bounds, the exhaustive optimum oracle, the experiment matrix runner
//! and ratio summaries.

mod experiment;
mod oracle;
mod summary;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::{Platform, TaskGraph};
use crate::instances::{GeneratorError, IoError};
use crate::lp::LpError;
use crate::offline::{heft_schedule, hlp_pipeline, HlpPolicy, OfflineError};
use crate::online::{online_run, ArrivalMode, OnlineError, OnlinePolicy};
use crate::schedule::{Schedule, ScheduleError};

pub use experiment::{run_experiment, write_records, BenchConfig, InstanceGroup, RunRecord, CSV_HEADER};
pub use oracle::{brute_force_opt, lower_bounds, Bounds, BRUTE_FORCE_MAX_TASKS};
pub use summary::{read_records, summarize, Summary, SummaryRow, DEFAULT_PAIRS};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("instance has {tasks} tasks, the exhaustive oracle stops at {cap}")]
    TooLarge { tasks: usize, cap: usize },
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Offline(#[from] OfflineError),
    #[error(transparent)]
    Online(#[from] OnlineError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Graph(#[from] IoError),
}

impl BenchError {
    pub fn code(&self) -> &'static str {
        match self {
            BenchError::TooLarge { .. } => "TooLarge",
            BenchError::UnknownAlgorithm(_) => "UnknownAlgorithm",
            BenchError::Config(_) => "ConfigError",
            BenchError::Io { .. } => "IoError",
            BenchError::Csv(_) => "ParseError",
            BenchError::Lp(e) => e.code(),
            BenchError::Offline(e) => e.code(),
            BenchError::Online(e) => e.code(),
            BenchError::Schedule(e) => e.code(),
            BenchError::Generator(e) => e.code(),
            BenchError::Graph(e) => e.code(),
        }
    }
}

/// Every algorithm the harness and the command line can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Relaxation, rounding, then EST or OLS. `q_named` only changes the
    /// printed name (`qhlp-*` instead of `hlp-*`).
    Hlp { policy: HlpPolicy, q_named: bool },
    Heft,
    Online(OnlinePolicy),
}

pub const ALGORITHM_NAMES: [&str; 12] =
    ["hlp-est", "hlp-ols", "qhlp-est", "qhlp-ols", "heft", "erls", "eft", "greedy", "random", "r1", "r2", "r3"];

impl Algorithm {
    /// Parses a name; `seed` feeds the `random` policy.
    pub fn parse(name: &str, seed: u64) -> Result<Self, BenchError> {
        let hlp = |policy, q_named| Algorithm::Hlp { policy, q_named };
        Ok(match name {
            "hlp-est" => hlp(HlpPolicy::Est, false),
            "hlp-ols" => hlp(HlpPolicy::Ols, false),
            "qhlp-est" => hlp(HlpPolicy::Est, true),
            "qhlp-ols" => hlp(HlpPolicy::Ols, true),
            "heft" => Algorithm::Heft,
            other => Algorithm::Online(
                OnlinePolicy::parse(other, seed).ok_or_else(|| BenchError::UnknownAlgorithm(other.to_string()))?,
            ),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Hlp { policy: HlpPolicy::Est, q_named: false } => "hlp-est",
            Algorithm::Hlp { policy: HlpPolicy::Ols, q_named: false } => "hlp-ols",
            Algorithm::Hlp { policy: HlpPolicy::Est, q_named: true } => "qhlp-est",
            Algorithm::Hlp { policy: HlpPolicy::Ols, q_named: true } => "qhlp-ols",
            Algorithm::Heft => "heft",
            Algorithm::Online(p) => p.name(),
        }
    }

    /// Runs the algorithm from scratch.
    pub fn run(&self, g: &TaskGraph, platform: &Platform, arrival: ArrivalMode) -> Result<Schedule, BenchError> {
        Ok(match *self {
            Algorithm::Hlp { policy, .. } => hlp_pipeline(g, platform, policy)?,
            Algorithm::Heft => heft_schedule(g, platform)?,
            Algorithm::Online(policy) => online_run(g, platform, policy, arrival)?.schedule,
        })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        Algorithm::parse(s, 0)
    }
}
