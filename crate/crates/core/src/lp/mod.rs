//! Linear relaxation of the allocation problem and the simplex that solves it.

pub mod hlp;
pub mod simplex;

pub use hlp::{
    build_hlp, inject_solution, round_allocation, solve_lp, solve_lp_with, Layout, LpError, LpModel, LpSolution,
    LP_CMP_TOL, LP_FEAS_TOL,
};
pub use simplex::{LinearProgram, LpOutcome, LpSolver, LpStatus, Sense, Simplex, SimplexError};
