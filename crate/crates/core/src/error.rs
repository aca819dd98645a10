use thiserror::Error;

use crate::bench::BenchError;
use crate::graph::{GraphError, PlatformError};
use crate::instances::{GeneratorError, IoError};
use crate::lp::LpError;
use crate::offline::OfflineError;
use crate::online::OnlineError;
use crate::schedule::ScheduleError;

/// Any error of the crate, classified for process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Offline(#[from] OfflineError),
    #[error(transparent)]
    Online(#[from] OnlineError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

/// How a failure maps to a process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Input that parses but breaks an invariant.
    Validation,
    /// Unreadable or malformed input.
    Parse,
    /// Solver or other internal failure.
    Internal,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Validation => 1,
            ErrorClass::Parse => 2,
            ErrorClass::Internal => 3,
        }
    }
}

fn lp_class(e: &LpError) -> ErrorClass {
    match e {
        LpError::Graph(_) | LpError::InfeasibleInjection(_) | LpError::InjectionShape(_) => ErrorClass::Validation,
        LpError::Infeasible | LpError::Unbounded | LpError::Solver(_) => ErrorClass::Internal,
    }
}

fn io_class(e: &IoError) -> ErrorClass {
    match e {
        IoError::Io { .. } | IoError::Parse { .. } => ErrorClass::Parse,
        IoError::Invalid(_) => ErrorClass::Validation,
    }
}

fn offline_class(e: &OfflineError) -> ErrorClass {
    match e {
        OfflineError::Lp(e) => lp_class(e),
        _ => ErrorClass::Validation,
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Graph(_) | Error::Generator(_) | Error::Online(_) | Error::Schedule(_) => ErrorClass::Validation,
            Error::Platform(_) => ErrorClass::Parse,
            Error::Io(e) => io_class(e),
            Error::Lp(e) => lp_class(e),
            Error::Offline(e) => offline_class(e),
            Error::Bench(e) => match e {
                BenchError::Config(_) | BenchError::Io { .. } | BenchError::Csv(_) => ErrorClass::Parse,
                BenchError::UnknownAlgorithm(_) => ErrorClass::Parse,
                BenchError::TooLarge { .. } | BenchError::Online(_) | BenchError::Schedule(_) => ErrorClass::Validation,
                BenchError::Generator(_) => ErrorClass::Validation,
                BenchError::Lp(e) => lp_class(e),
                BenchError::Offline(e) => offline_class(e),
                BenchError::Graph(e) => io_class(e),
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }

    /// Short stable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Graph(e) => e.code(),
            Error::Platform(_) => "PlatformError",
            Error::Io(e) => e.code(),
            Error::Generator(e) => e.code(),
            Error::Lp(e) => e.code(),
            Error::Offline(e) => e.code(),
            Error::Online(e) => e.code(),
            Error::Schedule(e) => e.code(),
            Error::Bench(e) => e.code(),
        }
    }
}
