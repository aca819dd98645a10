//! The allocation LP: critical-path and per-type load lower bounds on the
//! makespan, relaxed to fractional assignments, plus the rounding step.
//!
//! Two layouts are built. With two resource types the assignment is a single
//! CPU fraction `x_j` per task (the GPU share is `1 - x_j`). With three or
//! more types there is one variable `x_{j,q}` per (task, type) and an
//! explicit `Σ_q x_{j,q} = 1` row. Forbidden (task, type) pairs are fixed
//! through variable bounds and contribute no processing time.

use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{Allocation, GraphError, Platform, TaskGraph, TaskId, CPU, GPU};
use crate::lp::simplex::{LinearProgram, LpSolver, LpStatus, Sense, Simplex, SimplexError};

/// Feasibility tolerance for LP rows, both solved and injected.
pub const LP_FEAS_TOL: f64 = 1e-7;
/// Slack when comparing fractional LP output (rounding thresholds, ties).
pub const LP_CMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("relaxation is infeasible")]
    Infeasible,
    #[error("relaxation is unbounded")]
    Unbounded,
    #[error(transparent)]
    Solver(#[from] SimplexError),
    #[error("injected solution violates {0}")]
    InfeasibleInjection(String),
    #[error("injected values have the wrong shape: {0}")]
    InjectionShape(String),
}

impl LpError {
    pub fn code(&self) -> &'static str {
        match self {
            LpError::Graph(e) => e.code(),
            LpError::Infeasible => "Infeasible",
            LpError::Unbounded => "Unbounded",
            LpError::Solver(SimplexError::IterationLimit(_)) => "IterationLimit",
            LpError::Solver(_) => "SolverFailure",
            LpError::InfeasibleInjection(_) => "InfeasibleInjection",
            LpError::InjectionShape(_) => "InjectionShape",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Two types, one CPU-fraction variable per task.
    Folded,
    /// Q types, one variable per (task, type) and an assignment row.
    PerType,
}

/// The relaxed allocation program for one (graph, platform) pair.
#[derive(Debug, Clone)]
pub struct LpModel {
    pub lp: LinearProgram,
    pub layout: Layout,
    num_types: usize,
    /// Per task: its assignment variables, one (Folded) or one per type.
    x_vars: Vec<Vec<usize>>,
    c_vars: Vec<usize>,
    lambda: usize,
    task_ids: Vec<TaskId>,
}

/// Fractional allocation, completion times and objective of the relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// `x[task][type]`, each row summing to 1.
    pub x: Vec<Vec<f64>>,
    pub completion: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
}

impl LpSolution {
    pub fn fraction(&self, g: &TaskGraph, id: TaskId, ty: usize) -> Option<f64> {
        g.index_of(id).map(|i| self.x[i][ty])
    }
}

impl LpModel {
    pub fn num_x_vars(&self) -> usize {
        self.x_vars.iter().map(Vec::len).sum()
    }

    pub fn num_c_vars(&self) -> usize {
        self.c_vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.lp.num_rows()
    }

    pub fn lambda_var(&self) -> usize {
        self.lambda
    }

    /// Bounds of the assignment variable(s) of task `idx`.
    pub fn x_bounds(&self, idx: usize) -> Vec<(f64, f64)> {
        self.x_vars[idx].iter().map(|&v| (self.lp.vars[v].lower, self.lp.vars[v].upper)).collect()
    }

    /// Expands raw LP values into per-(task, type) fractions.
    fn fractions(&self, values: &[f64]) -> Vec<Vec<f64>> {
        self.x_vars
            .iter()
            .map(|vars| match self.layout {
                Layout::Folded => {
                    let cpu = values[vars[0]].clamp(0.0, 1.0);
                    vec![cpu, 1.0 - cpu]
                }
                Layout::PerType => vars.iter().map(|&v| values[v].clamp(0.0, 1.0)).collect(),
            })
            .collect()
    }

    /// Writes the model in CPLEX LP text format.
    pub fn to_cplex_lp(&self) -> String {
        let lp = &self.lp;
        let mut out = String::new();
        let term = |out: &mut String, first: bool, a: f64, name: &str| {
            let sign = if a < 0.0 { " -" } else if first { "" } else { " +" };
            let mag = a.abs();
            if mag == 1.0 {
                let _ = write!(out, "{sign} {name}");
            } else {
                let _ = write!(out, "{sign} {mag} {name}");
            }
        };
        out.push_str("\\ allocation relaxation\nMinimize\n obj:");
        let mut first = true;
        for (j, &c) in lp.objective.iter().enumerate() {
            if c != 0.0 {
                term(&mut out, first, c, &lp.vars[j].name);
                first = false;
            }
        }
        if first {
            out.push_str(" 0 lambda");
        }
        out.push_str("\nSubject To\n");
        for row in &lp.rows {
            let _ = write!(out, " {}:", row.name);
            for (k, &(j, a)) in row.coeffs.iter().enumerate() {
                term(&mut out, k == 0, a, &lp.vars[j].name);
            }
            if row.coeffs.is_empty() {
                out.push_str(" 0 lambda");
            }
            let _ = writeln!(out, " {} {}", row.sense, row.rhs);
        }
        out.push_str("Bounds\n");
        for v in &lp.vars {
            if v.upper.is_infinite() {
                let _ = writeln!(out, " {} >= {}", v.name, v.lower);
            } else if v.lower == v.upper {
                let _ = writeln!(out, " {} = {}", v.name, v.lower);
            } else {
                let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
            }
        }
        out.push_str("End\n");
        out
    }
}

/// Builds the relaxed program: precedence and release rows, `C_j ≤ λ`, one
/// average-load row per type, and (for Q ≥ 3) assignment rows.
pub fn build_hlp(g: &TaskGraph, platform: &Platform) -> Result<LpModel, LpError> {
    crate::graph::validate_graph(g, platform)?;
    let q = platform.num_types();
    let layout = if q == 2 { Layout::Folded } else { Layout::PerType };
    let mut lp = LinearProgram::default();
    let n = g.len();

    let mut x_vars = Vec::with_capacity(n);
    for task in g.tasks() {
        let vars = match layout {
            Layout::Folded => {
                let (lo, hi) = match (task.is_allowed(CPU), task.is_allowed(GPU)) {
                    (true, true) => (0.0, 1.0),
                    (true, false) => (1.0, 1.0),
                    _ => (0.0, 0.0),
                };
                vec![lp.add_var(format!("x_{}", task.id), lo, hi, 0.0)]
            }
            Layout::PerType => (0..q)
                .map(|ty| {
                    let hi = if task.is_allowed(ty) { 1.0 } else { 0.0 };
                    lp.add_var(format!("x_{}_{}", task.id, ty), 0.0, hi, 0.0)
                })
                .collect(),
        };
        x_vars.push(vars);
    }
    let c_vars: Vec<usize> =
        g.tasks().iter().map(|t| lp.add_var(format!("C_{}", t.id), 0.0, f64::INFINITY, 0.0)).collect();
    let lambda = lp.add_var("lambda", 0.0, f64::INFINITY, 1.0);

    // processing time of task i as (constant, linear terms)
    let duration = |i: usize| -> (f64, Vec<(usize, f64)>) {
        let task = g.task(i);
        match layout {
            Layout::Folded => {
                let cpu = task.cpu_time().unwrap_or(0.0);
                let gpu = task.gpu_time().unwrap_or(0.0);
                (gpu, vec![(x_vars[i][0], cpu - gpu)])
            }
            Layout::PerType => (
                0.0,
                (0..q).filter_map(|ty| task.time(ty).map(|p| (x_vars[i][ty], p))).collect(),
            ),
        }
    };

    for &(a, b) in g.edges() {
        let (i, j) = (g.index_of(a).expect("validated"), g.index_of(b).expect("validated"));
        let (constant, mut terms) = duration(j);
        terms.retain(|&(_, c)| c != 0.0);
        terms.push((c_vars[i], 1.0));
        terms.push((c_vars[j], -1.0));
        lp.add_row(format!("prec_{a}_{b}"), terms, Sense::Le, -constant);
    }
    for j in 0..n {
        if g.preds(j).is_empty() {
            let (constant, mut terms) = duration(j);
            terms.retain(|&(_, c)| c != 0.0);
            terms.push((c_vars[j], -1.0));
            lp.add_row(format!("release_{}", g.id(j)), terms, Sense::Le, -constant);
        }
    }
    for j in 0..n {
        lp.add_row(format!("horizon_{}", g.id(j)), vec![(c_vars[j], 1.0), (lambda, -1.0)], Sense::Le, 0.0);
    }
    for ty in 0..q {
        let inv = 1.0 / platform.machines(ty) as f64;
        let mut terms = Vec::new();
        let mut constant = 0.0;
        for (i, task) in g.tasks().iter().enumerate() {
            let Some(p) = task.time(ty) else { continue };
            match layout {
                Layout::PerType => terms.push((x_vars[i][ty], p * inv)),
                // CPU share is x_j, GPU share is 1 - x_j
                Layout::Folded if ty == CPU => terms.push((x_vars[i][0], p * inv)),
                Layout::Folded => {
                    constant += p * inv;
                    terms.push((x_vars[i][0], -p * inv));
                }
            }
        }
        terms.retain(|&(_, c)| c != 0.0);
        terms.push((lambda, -1.0));
        lp.add_row(format!("load_{ty}"), terms, Sense::Le, -constant);
    }
    if layout == Layout::PerType {
        for (i, vars) in x_vars.iter().enumerate() {
            let terms = vars.iter().map(|&v| (v, 1.0)).collect();
            lp.add_row(format!("assign_{}", g.id(i)), terms, Sense::Eq, 1.0);
        }
    }

    Ok(LpModel {
        lp,
        layout,
        num_types: q,
        x_vars,
        c_vars,
        lambda,
        task_ids: g.tasks().iter().map(|t| t.id).collect(),
    })
}

/// Solves the relaxation with the bundled simplex.
pub fn solve_lp(model: &LpModel) -> Result<LpSolution, LpError> {
    solve_lp_with(model, &Simplex::default())
}

pub fn solve_lp_with(model: &LpModel, solver: &dyn LpSolver) -> Result<LpSolution, LpError> {
    let outcome = solver.solve(&model.lp)?;
    match outcome.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(LpError::Infeasible),
        LpStatus::Unbounded => return Err(LpError::Unbounded),
    }
    Ok(LpSolution {
        x: model.fractions(&outcome.values),
        completion: model.c_vars.iter().map(|&c| outcome.values[c]).collect(),
        objective: outcome.values[model.lambda],
        status: LpStatus::Optimal,
    })
}

/// Wraps externally supplied values as a solution after checking every row
/// and bound of the model within [`LP_FEAS_TOL`].
///
/// `x[task][type]` follows graph task order; with two types only the CPU
/// fraction `x[task][0]` is read and the GPU share must be its complement.
pub fn inject_solution(
    model: &LpModel,
    x: &[Vec<f64>],
    completion: &[f64],
    lambda: f64,
) -> Result<LpSolution, LpError> {
    let n = model.task_ids.len();
    if x.len() != n || completion.len() != n {
        return Err(LpError::InjectionShape(format!(
            "expected {n} tasks, got {} fraction rows and {} completions",
            x.len(),
            completion.len()
        )));
    }
    let mut values = vec![0.0; model.lp.num_vars()];
    for (i, row) in x.iter().enumerate() {
        if row.len() != model.num_types {
            return Err(LpError::InjectionShape(format!("task {} has {} fractions", model.task_ids[i], row.len())));
        }
        match model.layout {
            Layout::Folded => {
                if (row[0] + row[1] - 1.0).abs() > LP_FEAS_TOL {
                    return Err(LpError::InfeasibleInjection(format!("assign_{}", model.task_ids[i])));
                }
                values[model.x_vars[i][0]] = row[0];
            }
            Layout::PerType => {
                for (ty, &v) in row.iter().enumerate() {
                    values[model.x_vars[i][ty]] = v;
                }
            }
        }
        values[model.c_vars[i]] = completion[i];
    }
    values[model.lambda] = lambda;
    if let Some(violated) = model.lp.first_violation(&values, LP_FEAS_TOL) {
        return Err(LpError::InfeasibleInjection(violated));
    }
    Ok(LpSolution {
        x: model.fractions(&values),
        completion: completion.to_vec(),
        objective: lambda,
        status: LpStatus::Optimal,
    })
}

/// Rounds fractions to an integral allocation.
///
/// Two types: CPU iff `x_j ≥ ½`. More types: the largest fraction, ties going
/// to the smallest processing time and then the smallest type index.
pub fn round_allocation(sol: &LpSolution, g: &TaskGraph) -> Allocation {
    let q = g.num_types();
    let types = g
        .tasks()
        .iter()
        .enumerate()
        .map(|(i, task)| {
            let x = &sol.x[i];
            if q == 2 {
                let cpu = x[CPU] >= 0.5 - LP_CMP_TOL;
                match (cpu, task.is_allowed(CPU), task.is_allowed(GPU)) {
                    (true, true, _) | (false, true, false) => CPU,
                    _ => GPU,
                }
            } else {
                let mut best: Option<usize> = None;
                for ty in task.allowed_types() {
                    best = match best {
                        None => Some(ty),
                        Some(b) if x[ty] > x[b] + LP_CMP_TOL => Some(ty),
                        Some(b) if x[ty] >= x[b] - LP_CMP_TOL
                            && task.time(ty).unwrap() < task.time(b).unwrap() =>
                        {
                            Some(ty)
                        }
                        keep => keep,
                    };
                }
                best.expect("every task has an allowed type")
            }
        })
        .collect();
    Allocation::new(g, types).expect("rounding only selects allowed types")
}
