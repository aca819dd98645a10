//! Allocation-then-scheduling algorithms for precedence task graphs on
//! hybrid platforms made of several types of identical machines (CPUs, GPUs).
//!
//! The crate covers the whole pipeline: the task-graph model, a linear
//! relaxation of the allocation problem with its rounding, offline list
//! schedulers (EST, OLS, HEFT), online policies (ER-LS and baselines),
//! instance generators and a benchmark harness.

pub mod bench;
mod error;
pub mod graph;
pub mod instances;
pub mod lp;
pub mod offline;
pub mod online;
pub mod schedule;

pub use error::{Error, ErrorClass};
pub use graph::{
    compute_rank_alloc, compute_rank_avg, validate_graph, Allocation, AllocationError, GraphError, Platform,
    PlatformError, RankTable, Task, TaskGraph, TaskId, CPU, GPU,
};
pub use offline::{est_schedule, heft_schedule, hlp_pipeline, list_schedule, ols_schedule, HlpPolicy, Priority};
pub use online::{arrival_stream, online_run, ArrivalMode, OnlinePolicy};
pub use schedule::{validate_schedule, Placement, Schedule, ScheduleDocument, ScheduleError};
