//! Dense bounded-variable primal simplex.
//!
//! Two phases over a full tableau `B⁻¹A`. Nonbasic variables sit at one of
//! their bounds, so box constraints never become rows. Pricing is Dantzig's
//! largest reduced cost; after a run of degenerate pivots the solver switches
//! to Bland's smallest-index rule until the objective moves again, which rules
//! out cycling. Row updates touch only the nonzero entries of the pivot row
//! and column, which keeps the difference-constraint structure of scheduling
//! LPs cheap to pivot on.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Amount by which `values` violates this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }

    /// Magnitude used to scale feasibility tolerances.
    pub fn scale(&self, values: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .map(|&(j, a)| (a * values[j]).abs())
            .fold(self.rhs.abs(), f64::max)
            .max(1.0)
    }
}

/// `minimize c·x` subject to rows and variable bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub vars: Vec<Variable>,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.vars.push(Variable { name: name.into(), lower, upper });
        self.objective.push(cost);
        self.vars.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row { name: name.into(), coeffs, sense, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// First row or bound violated by more than `tol` (scaled), if any.
    pub fn first_violation(&self, values: &[f64], tol: f64) -> Option<String> {
        for (v, &x) in self.vars.iter().zip(values) {
            let scale = x.abs().max(1.0);
            if x < v.lower - tol * scale || x > v.upper + tol * scale {
                return Some(format!("bound of {} ({} not in [{}, {}])", v.name, x, v.lower, v.upper));
            }
        }
        self.rows
            .iter()
            .find(|row| row.violation(values) > tol * row.scale(values))
            .map(|row| row.name.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimplexError {
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("variable {0} has no finite bound")]
    FreeVariable(String),
    #[error("variable {0} has an empty domain")]
    EmptyDomain(String),
    #[error("numerical failure: final point violates {0}")]
    Numerical(String),
}

/// Anything able to solve a [`LinearProgram`]; lets an external solver stand in.
pub trait LpSolver {
    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome, SimplexError>;
}

#[derive(Debug, Clone)]
pub struct Simplex {
    /// Iteration cap per phase is `iteration_factor * (rows + columns)`.
    pub iteration_factor: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub degenerate_limit: usize,
}

impl Default for Simplex {
    fn default() -> Self {
        Simplex {
            iteration_factor: 50,
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            pivot_tol: 1e-7,
            degenerate_limit: 50,
        }
    }
}

impl LpSolver for Simplex {
    /// Solves from scratch; when the result fails the final row check, retries
    /// with pivot thresholds raised a hundredfold, twice.
    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome, SimplexError> {
        let mut cfg = self.clone();
        let mut attempt = 0;
        loop {
            match Tableau::build(lp)?.run(lp, &cfg) {
                Err(SimplexError::Numerical(_)) if attempt < 2 => {
                    attempt += 1;
                    cfg.pivot_tol *= 100.0;
                }
                other => return other,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major `rows × cols`.
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    kind: Vec<Kind>,
    value: Vec<f64>,
    basis: Vec<usize>,
    /// Row of a basic column, `usize::MAX` for nonbasic.
    row_of: Vec<usize>,
    /// Column that was basic in each row initially, and its original coefficient.
    init_col: Vec<(usize, f64)>,
    /// Original right-hand sides and sparse columns, used to refresh basic values.
    rhs: Vec<f64>,
    columns: Vec<Vec<(usize, f64)>>,
    reduced: Vec<f64>,
    iterations: usize,
}

const NONBASIC: usize = usize::MAX;
const DROP: f64 = 1e-13;

impl Tableau {
    fn build(lp: &LinearProgram) -> Result<Self, SimplexError> {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut kind = Vec::new();
        let mut value = Vec::new();
        for v in &lp.vars {
            if v.lower > v.upper {
                return Err(SimplexError::EmptyDomain(v.name.clone()));
            }
            let start = if v.lower.is_finite() {
                v.lower
            } else if v.upper.is_finite() {
                v.upper
            } else {
                return Err(SimplexError::FreeVariable(v.name.clone()));
            };
            lower.push(v.lower);
            upper.push(v.upper);
            kind.push(Kind::Structural);
            value.push(start);
        }

        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    columns[j].push((i, a));
                }
            }
        }

        // One slack per inequality; an artificial wherever the slack cannot
        // absorb the residual at the starting point.
        let mut init_col = Vec::with_capacity(m);
        let mut slack_of = vec![None; m];
        for (i, row) in lp.rows.iter().enumerate() {
            let sign = match row.sense {
                Sense::Le => 1.0,
                Sense::Ge => -1.0,
                Sense::Eq => continue,
            };
            let j = lower.len();
            lower.push(0.0);
            upper.push(f64::INFINITY);
            kind.push(Kind::Slack);
            value.push(0.0);
            columns.push(vec![(i, sign)]);
            slack_of[i] = Some((j, sign));
        }
        for (i, row) in lp.rows.iter().enumerate() {
            let residual = row.rhs - row.activity(&value);
            match slack_of[i] {
                Some((j, sign)) if residual * sign >= 0.0 => {
                    value[j] = residual * sign;
                    init_col.push((j, sign));
                }
                _ => {
                    let sign = if residual >= 0.0 { 1.0 } else { -1.0 };
                    let j = lower.len();
                    lower.push(0.0);
                    upper.push(f64::INFINITY);
                    kind.push(Kind::Artificial);
                    value.push(residual.abs());
                    columns.push(vec![(i, sign)]);
                    init_col.push((j, sign));
                }
            }
        }

        let cols = lower.len();
        let mut t = vec![0.0; m * cols];
        for (j, col) in columns.iter().enumerate() {
            for &(i, a) in col {
                // scale each row so its initial basic column is +1
                t[i * cols + j] = a * init_col[i].1;
            }
        }
        let mut row_of = vec![NONBASIC; cols];
        let basis: Vec<usize> = init_col.iter().map(|&(j, _)| j).collect();
        for (i, &j) in basis.iter().enumerate() {
            row_of[j] = i;
        }
        Ok(Tableau {
            rows: m,
            cols,
            t,
            lower,
            upper,
            kind,
            value,
            basis,
            row_of,
            init_col,
            rhs: lp.rows.iter().map(|r| r.rhs).collect(),
            columns,
            reduced: vec![0.0; cols],
            iterations: 0,
        })
    }

    fn run(mut self, lp: &LinearProgram, cfg: &Simplex) -> Result<LpOutcome, SimplexError> {
        let cap = cfg.iteration_factor * (self.rows + self.cols).max(1);
        let n = lp.num_vars();

        let has_artificial = self.kind.contains(&Kind::Artificial);
        if has_artificial {
            let cost: Vec<f64> = self.kind.iter().map(|&k| if k == Kind::Artificial { 1.0 } else { 0.0 }).collect();
            self.price(&cost);
            self.optimize(cfg, cap, true)?;
            self.refresh_values();
            let infeasibility: f64 = (0..self.cols)
                .filter(|&j| self.kind[j] == Kind::Artificial)
                .map(|j| self.value[j].abs())
                .sum();
            let scale = self.rhs.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            if infeasibility > cfg.feasibility_tol * scale {
                return Ok(self.outcome(lp, LpStatus::Infeasible, n));
            }
            self.retire_artificials(cfg);
        }

        let mut cost = lp.objective.clone();
        cost.resize(self.cols, 0.0);
        self.price(&cost);
        let status = self.optimize(cfg, cap, false)?;
        self.refresh_values();
        let outcome = self.outcome(lp, status, n);
        if status == LpStatus::Optimal {
            if let Some(row) = lp.first_violation(&outcome.values, cfg.feasibility_tol) {
                return Err(SimplexError::Numerical(row));
            }
        }
        Ok(outcome)
    }

    fn outcome(&self, lp: &LinearProgram, status: LpStatus, n: usize) -> LpOutcome {
        let mut values = self.value[..n].to_vec();
        for (x, v) in values.iter_mut().zip(&lp.vars) {
            *x = x.clamp(v.lower, v.upper);
        }
        let objective = lp.objective_value(&values);
        LpOutcome { status, values, objective, iterations: self.iterations }
    }

    /// Reduced costs `d = c - c_B B⁻¹A` for the given cost vector.
    fn price(&mut self, cost: &[f64]) {
        self.reduced.copy_from_slice(cost);
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * self.cols..(i + 1) * self.cols];
            for (d, &a) in self.reduced.iter_mut().zip(row) {
                *d -= cb * a;
            }
        }
        for &j in &self.basis {
            self.reduced[j] = 0.0;
        }
    }

    fn eligible(&self, j: usize, phase_one: bool) -> bool {
        self.row_of[j] == NONBASIC
            && self.lower[j] < self.upper[j]
            && (phase_one || self.kind[j] != Kind::Artificial)
    }

    /// Entering column and direction (+1 increase, -1 decrease).
    fn choose_entering(&self, cfg: &Simplex, phase_one: bool, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols {
            if !self.eligible(j, phase_one) {
                continue;
            }
            let d = self.reduced[j];
            let dir = if d < -cfg.optimality_tol && self.value[j] < self.upper[j] {
                1.0
            } else if d > cfg.optimality_tol && self.value[j] > self.lower[j] {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, score)| d.abs() > score) {
                best = Some((j, dir, d.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn optimize(&mut self, cfg: &Simplex, cap: usize, phase_one: bool) -> Result<LpStatus, SimplexError> {
        let mut degenerate_run = 0usize;
        let mut local = 0usize;
        loop {
            let bland = degenerate_run >= cfg.degenerate_limit;
            let Some((enter, dir)) = self.choose_entering(cfg, phase_one, bland) else {
                return Ok(LpStatus::Optimal);
            };
            local += 1;
            self.iterations += 1;
            if local > cap {
                return Err(SimplexError::IterationLimit(cap));
            }

            // ratio test
            let mut step = self.upper[enter] - self.lower[enter];
            let mut leave: Option<(usize, f64)> = None;
            let mut leave_score = 0.0;
            for i in 0..self.rows {
                let a = self.t[i * self.cols + enter];
                if a.abs() <= cfg.pivot_tol {
                    continue;
                }
                let alpha = a * dir;
                let b = self.basis[i];
                let limit = if alpha > 0.0 {
                    (self.value[b] - self.lower[b]) / alpha
                } else if self.upper[b].is_finite() {
                    (self.upper[b] - self.value[b]) / -alpha
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    None => limit < step,
                    Some((li, _)) => {
                        if limit < step - 1e-12 {
                            true
                        } else if limit <= step + 1e-12 {
                            // tie: Bland takes the smallest basic index, otherwise the largest pivot
                            if bland {
                                b < self.basis[li]
                            } else {
                                alpha.abs() > leave_score
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    step = step.min(limit);
                    leave = Some((i, alpha));
                    leave_score = alpha.abs();
                }
            }
            if step.is_infinite() {
                return Ok(LpStatus::Unbounded);
            }
            if step <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            // move along the edge
            if step > 0.0 {
                self.value[enter] += dir * step;
                for i in 0..self.rows {
                    let a = self.t[i * self.cols + enter];
                    if a != 0.0 {
                        let b = self.basis[i];
                        self.value[b] -= a * dir * step;
                    }
                }
            }
            match leave {
                None => {
                    // bound flip
                    self.value[enter] = if dir > 0.0 { self.upper[enter] } else { self.lower[enter] };
                }
                Some((r, alpha)) => {
                    let out = self.basis[r];
                    self.value[out] = if alpha > 0.0 { self.lower[out] } else { self.upper[out] };
                    self.pivot(r, enter);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, enter: usize) {
        let cols = self.cols;
        let piv = self.t[r * cols + enter];
        let mut nz = Vec::new();
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v /= piv;
                    if v.abs() < DROP {
                        *v = 0.0;
                    } else {
                        nz.push(j);
                    }
                }
            }
            row[enter] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        let update = |row: &mut [f64]| {
            let f = row[enter];
            if f == 0.0 {
                return;
            }
            for &j in &nz {
                let v = row[j] - f * prow[j];
                row[j] = if v.abs() < DROP { 0.0 } else { v };
            }
            row[enter] = 0.0;
        };
        before.chunks_exact_mut(cols).for_each(update);
        after.chunks_exact_mut(cols).for_each(update);

        let f = self.reduced[enter];
        if f != 0.0 {
            for &j in &nz {
                self.reduced[j] -= f * prow[j];
            }
            self.reduced[enter] = 0.0;
        }

        let out = self.basis[r];
        self.row_of[out] = NONBASIC;
        self.basis[r] = enter;
        self.row_of[enter] = r;
    }

    /// Recomputes basic values as `B⁻¹(b - N x_N)` from the original data.
    fn refresh_values(&mut self) {
        let mut residual = self.rhs.clone();
        for j in 0..self.cols {
            if self.row_of[j] == NONBASIC && self.value[j] != 0.0 {
                for &(i, a) in &self.columns[j] {
                    residual[i] -= a * self.value[j];
                }
            }
        }
        let mut basic = vec![0.0; self.rows];
        for (k, &(col, sign)) in self.init_col.iter().enumerate() {
            let rk = residual[k] / sign;
            if rk == 0.0 {
                continue;
            }
            for (i, b) in basic.iter_mut().enumerate() {
                *b += self.t[i * self.cols + col] * rk;
            }
        }
        for (i, v) in basic.into_iter().enumerate() {
            self.value[self.basis[i]] = v;
        }
    }

    /// Pivots zero-valued artificials out of the basis and pins all of them at 0.
    fn retire_artificials(&mut self, cfg: &Simplex) {
        for r in 0..self.rows {
            if self.kind[self.basis[r]] != Kind::Artificial {
                continue;
            }
            let candidate = (0..self.cols).find(|&j| {
                self.kind[j] != Kind::Artificial
                    && self.row_of[j] == NONBASIC
                    && self.t[r * self.cols + j].abs() > cfg.pivot_tol.max(1e-7)
            });
            if let Some(j) = candidate {
                let out = self.basis[r];
                self.value[out] = 0.0;
                self.pivot(r, j);
            }
        }
        for j in 0..self.cols {
            if self.kind[j] == Kind::Artificial {
                self.upper[j] = 0.0;
                self.lower[j] = 0.0;
                if self.row_of[j] == NONBASIC {
                    self.value[j] = 0.0;
                }
            }
        }
        self.refresh_values();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(lp: &LinearProgram) -> LpOutcome {
        Simplex::default().solve(lp).unwrap()
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18  => (2, 6), 36
        let mut lp = LinearProgram::default();
        let x = lp.add_var("x", 0.0, f64::INFINITY, -3.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, -5.0);
        lp.add_row("a", vec![(x, 1.0)], Sense::Le, 4.0);
        lp.add_row("b", vec![(y, 2.0)], Sense::Le, 12.0);
        lp.add_row("c", vec![(x, 3.0), (y, 2.0)], Sense::Le, 18.0);
        let out = solve(&lp);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective + 36.0).abs() < 1e-9);
        assert!((out.values[0] - 2.0).abs() < 1e-9 && (out.values[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn bounds_and_equalities() {
        // min x + y st x + y = 3, x in [0, 1], y in [0, 5], x - y >= -10
        let mut lp = LinearProgram::default();
        let x = lp.add_var("x", 0.0, 1.0, 2.0);
        let y = lp.add_var("y", 0.0, 5.0, 1.0);
        lp.add_row("sum", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 3.0);
        lp.add_row("diff", vec![(x, 1.0), (y, -1.0)], Sense::Ge, -10.0);
        let out = solve(&lp);
        assert!((out.objective - 3.0).abs() < 1e-9);
        assert!((out.values[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn bound_flip_only() {
        let mut lp = LinearProgram::default();
        lp.add_var("x", 0.0, 2.0, -1.0);
        let out = solve(&lp);
        assert_eq!(out.values, vec![2.0]);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::default();
        let x = lp.add_var("x", 0.0, 1.0, 1.0);
        lp.add_row("r", vec![(x, 1.0)], Sense::Ge, 2.0);
        assert_eq!(solve(&lp).status, LpStatus::Infeasible);

        let mut lp = LinearProgram::default();
        let x = lp.add_var("x", 0.0, f64::INFINITY, -1.0);
        lp.add_row("r", vec![(x, 1.0)], Sense::Ge, 1.0);
        assert_eq!(solve(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn rejects_free_variables() {
        let mut lp = LinearProgram::default();
        lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        assert!(matches!(Simplex::default().solve(&lp), Err(SimplexError::FreeVariable(_))));
    }

    #[test]
    fn redundant_equalities() {
        // x + y = 1 twice; min -x  => x = 1
        let mut lp = LinearProgram::default();
        let x = lp.add_var("x", 0.0, f64::INFINITY, -1.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 0.0);
        lp.add_row("a", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 1.0);
        lp.add_row("b", vec![(x, 2.0), (y, 2.0)], Sense::Eq, 2.0);
        let out = solve(&lp);
        assert!((out.values[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_program() {
        let mut lp = LinearProgram::default();
        lp.add_var("l", 0.0, f64::INFINITY, 1.0);
        let out = solve(&lp);
        assert_eq!(out.objective, 0.0);
    }
}
