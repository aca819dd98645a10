use crate::graph::{Platform, TaskGraph};
use crate::lp::{build_hlp, solve_lp};
use crate::offline::heft_schedule;

use super::BenchError;

/// Largest instance the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_TASKS: usize = 7;

/// Makespan lower bounds: the relaxation optimum and the min-time critical path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lp_star: f64,
    pub cp_min: f64,
}

pub fn lower_bounds(g: &TaskGraph, platform: &Platform) -> Result<Bounds, BenchError> {
    let model = build_hlp(g, platform)?;
    let sol = solve_lp(&model)?;
    Ok(Bounds { lp_star: sol.objective, cp_min: g.critical_path_min() })
}

/// Exact optimum for tiny instances.
///
/// Explores every (task order, type) sequence where each task is appended at
/// the earliest start on the earliest-available machine of its type. Taking
/// the tasks of an optimal schedule by start time reproduces it or improves
/// it, so the minimum over this space is the optimum.
pub fn brute_force_opt(g: &TaskGraph, platform: &Platform) -> Result<f64, BenchError> {
    if g.len() > BRUTE_FORCE_MAX_TASKS {
        return Err(BenchError::TooLarge { tasks: g.len(), cap: BRUTE_FORCE_MAX_TASKS });
    }
    if g.is_empty() {
        return Ok(0.0);
    }
    let upper = heft_schedule(g, platform)?.makespan_or_zero();
    // min-time length of the longest path leaving each task, excluding itself
    let mut tail = vec![0.0f64; g.len()];
    for &i in g.topo_indices().iter().rev() {
        tail[i] = g.succs(i).iter().map(|&s| g.task(s).min_time() + tail[s]).fold(0.0, f64::max);
    }
    let mut search = Search {
        g,
        tail,
        avail: (0..platform.num_types()).map(|ty| vec![0.0; platform.machines(ty)]).collect(),
        finish: vec![0.0; g.len()],
        missing: (0..g.len()).map(|i| g.preds(i).len()).collect(),
        placed: vec![false; g.len()],
        best: upper,
    };
    search.dfs(g.len(), 0.0);
    Ok(search.best)
}

struct Search<'g> {
    g: &'g TaskGraph,
    tail: Vec<f64>,
    avail: Vec<Vec<f64>>,
    finish: Vec<f64>,
    missing: Vec<usize>,
    placed: Vec<bool>,
    best: f64,
}

impl Search<'_> {
    fn dfs(&mut self, left: usize, makespan: f64) {
        if left == 0 {
            self.best = self.best.min(makespan);
            return;
        }
        let g = self.g;
        for i in 0..g.len() {
            if self.placed[i] || self.missing[i] > 0 {
                continue;
            }
            let release = g.preds(i).iter().map(|&p| self.finish[p]).fold(0.0, f64::max);
            for ty in g.task(i).allowed_types() {
                let p = g.task(i).time(ty).expect("allowed");
                let avail = &self.avail[ty];
                let machine = (0..avail.len()).fold(0, |b, m| if avail[m] < avail[b] { m } else { b });
                let start = release.max(avail[machine]);
                let end = start + p;
                if end + self.tail[i] >= self.best {
                    continue;
                }
                let saved = self.avail[ty][machine];
                self.avail[ty][machine] = end;
                self.finish[i] = end;
                self.placed[i] = true;
                for &s in g.succs(i) {
                    self.missing[s] -= 1;
                }
                self.dfs(left - 1, makespan.max(end));
                for &s in g.succs(i) {
                    self.missing[s] += 1;
                }
                self.placed[i] = false;
                self.avail[ty][machine] = saved;
            }
        }
    }
}
