//! Offline schedulers: list scheduling, EST, OLS, HEFT and the LP-based
//! pipelines that chain the relaxation, its rounding and a list scheduler.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::graph::{compute_rank_alloc, compute_rank_avg, validate_graph, Allocation, GraphError, Platform, RankTable};
use crate::graph::{TaskGraph, TaskId};
use crate::lp::{build_hlp, round_allocation, solve_lp, LpError, LpSolution};
use crate::schedule::{Placement, Schedule};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OfflineError {
    #[error("task {task} is allocated to forbidden type {ty}")]
    AllocatesForbiddenType { task: TaskId, ty: usize },
    #[error("allocation covers {found} tasks, graph has {expected}")]
    AllocationSize { expected: usize, found: usize },
    #[error("priority order is not a permutation of the graph's tasks")]
    PriorityShape,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

impl OfflineError {
    pub fn code(&self) -> &'static str {
        match self {
            OfflineError::AllocatesForbiddenType { .. } => "AllocatesForbiddenType",
            OfflineError::AllocationSize { .. } => "AllocationSize",
            OfflineError::PriorityShape => "PriorityShape",
            OfflineError::Graph(e) => e.code(),
            OfflineError::Lp(e) => e.code(),
        }
    }
}

/// Task priority for [`list_schedule`].
#[derive(Debug, Clone, Copy)]
pub enum Priority<'a> {
    /// Higher rank first, ties by ascending id.
    Rank(&'a RankTable),
    /// Explicit order, earlier first (for example an arrival order).
    Order(&'a [TaskId]),
    /// Ascending task id.
    Id,
}

impl Priority<'_> {
    /// Position of every task index in the priority order.
    fn positions(&self, g: &TaskGraph) -> Result<Vec<usize>, OfflineError> {
        let order: Vec<usize> = match self {
            Priority::Rank(ranks) => {
                if ranks.as_slice().len() != g.len() {
                    return Err(OfflineError::PriorityShape);
                }
                ranks.order(g)
            }
            Priority::Order(ids) => {
                let idx: Option<Vec<usize>> = ids.iter().map(|&id| g.index_of(id)).collect();
                idx.ok_or(OfflineError::PriorityShape)?
            }
            Priority::Id => {
                let mut v: Vec<usize> = (0..g.len()).collect();
                v.sort_by_key(|&i| g.id(i));
                v
            }
        };
        let mut pos = vec![usize::MAX; g.len()];
        for (p, &i) in order.iter().enumerate() {
            if pos[i] != usize::MAX {
                return Err(OfflineError::PriorityShape);
            }
            pos[i] = p;
        }
        if order.len() != g.len() {
            return Err(OfflineError::PriorityShape);
        }
        Ok(pos)
    }
}

/// Which scheduler follows the LP allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlpPolicy {
    Est,
    Ols,
}

fn check_alloc(g: &TaskGraph, platform: &Platform, alloc: &Allocation) -> Result<(), OfflineError> {
    validate_graph(g, platform)?;
    if alloc.types().len() != g.len() {
        return Err(OfflineError::AllocationSize { expected: g.len(), found: alloc.types().len() });
    }
    for (i, &ty) in alloc.types().iter().enumerate() {
        if !g.task(i).is_allowed(ty) {
            return Err(OfflineError::AllocatesForbiddenType { task: g.id(i), ty });
        }
    }
    Ok(())
}

/// Index of the machine with the smallest availability, lowest index on ties.
fn earliest_machine(avail: &[f64]) -> usize {
    let mut best = 0;
    for (m, &a) in avail.iter().enumerate().skip(1) {
        if a < avail[best] {
            best = m;
        }
    }
    best
}

/// Completion event ordered by time, then task index, earliest first.
#[derive(Debug, PartialEq)]
struct Event(f64, usize);

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Event-driven list scheduling on a fixed allocation.
///
/// Whenever a machine of some type is idle and a ready task allocated to that
/// type waits, the highest-priority such task starts at once on the
/// earliest-available idle machine. No machine idles while work for it is
/// ready.
pub fn list_schedule(
    g: &TaskGraph,
    platform: &Platform,
    alloc: &Allocation,
    priority: Priority<'_>,
) -> Result<Schedule, OfflineError> {
    check_alloc(g, platform, alloc)?;
    let pos = priority.positions(g)?;
    let q = platform.num_types();
    let mut avail: Vec<Vec<f64>> = (0..q).map(|ty| vec![0.0; platform.machines(ty)]).collect();
    let mut ready: Vec<BinaryHeap<Reverse<(usize, usize)>>> = (0..q).map(|_| BinaryHeap::new()).collect();
    let mut missing: Vec<usize> = (0..g.len()).map(|i| g.preds(i).len()).collect();
    let mut events = BinaryHeap::new();
    let mut schedule = Schedule::new();

    for i in (0..g.len()).filter(|&i| missing[i] == 0) {
        ready[alloc.type_of(i)].push(Reverse((pos[i], i)));
    }
    let mut now = 0.0f64;
    loop {
        for ty in 0..q {
            while let Some(&Reverse((_, i))) = ready[ty].peek() {
                let machine = earliest_machine(&avail[ty]);
                if avail[ty][machine] > now {
                    break;
                }
                ready[ty].pop();
                let finish = now + alloc.time_of(g, i);
                avail[ty][machine] = finish;
                schedule.insert(g.id(i), Placement { ty, machine, start: now, finish });
                events.push(Event(finish, i));
            }
        }
        let Some(Event(t, _)) = events.peek() else { break };
        now = *t;
        while let Some(Event(t, i)) = events.peek() {
            if *t > now {
                break;
            }
            let i = *i;
            events.pop();
            for &s in g.succs(i) {
                missing[s] -= 1;
                if missing[s] == 0 {
                    ready[alloc.type_of(s)].push(Reverse((pos[s], s)));
                }
            }
        }
    }
    Ok(schedule)
}

/// Serial earliest-start scheduling on a fixed allocation.
///
/// Repeatedly commits the ready task whose earliest start on its allocated
/// type is smallest (ties by ascending id) on the earliest-available machine.
pub fn est_schedule(g: &TaskGraph, platform: &Platform, alloc: &Allocation) -> Result<Schedule, OfflineError> {
    check_alloc(g, platform, alloc)?;
    let q = platform.num_types();
    let mut avail: Vec<Vec<f64>> = (0..q).map(|ty| vec![0.0; platform.machines(ty)]).collect();
    let mut missing: Vec<usize> = (0..g.len()).map(|i| g.preds(i).len()).collect();
    let mut release = vec![0.0f64; g.len()];
    let mut ready: Vec<usize> = (0..g.len()).filter(|&i| missing[i] == 0).collect();
    let mut schedule = Schedule::new();

    while !ready.is_empty() {
        let first_free: Vec<(usize, f64)> = avail
            .iter()
            .map(|a| {
                let m = earliest_machine(a);
                (m, a[m])
            })
            .collect();
        let start_of = |i: usize| release[i].max(first_free[alloc.type_of(i)].1);
        let (slot, &i) = ready
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| start_of(a).total_cmp(&start_of(b)).then(g.id(a).cmp(&g.id(b))))
            .expect("ready set is non-empty");
        ready.swap_remove(slot);
        let ty = alloc.type_of(i);
        let machine = first_free[ty].0;
        let start = start_of(i);
        let finish = start + alloc.time_of(g, i);
        avail[ty][machine] = finish;
        schedule.insert(g.id(i), Placement { ty, machine, start, finish });
        for &s in g.succs(i) {
            release[s] = release[s].max(finish);
            missing[s] -= 1;
            if missing[s] == 0 {
                ready.push(s);
            }
        }
    }
    Ok(schedule)
}

/// List scheduling with allocation-aware upward ranks as priorities.
pub fn ols_schedule(g: &TaskGraph, platform: &Platform, alloc: &Allocation) -> Result<Schedule, OfflineError> {
    check_alloc(g, platform, alloc)?;
    let ranks = compute_rank_alloc(g, alloc);
    list_schedule(g, platform, alloc, Priority::Rank(&ranks))
}

/// Whether HEFT may backfill idle gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeftMode {
    Insertion,
    Append,
}

/// HEFT with gap insertion.
pub fn heft_schedule(g: &TaskGraph, platform: &Platform) -> Result<Schedule, OfflineError> {
    heft_schedule_with(g, platform, HeftMode::Insertion)
}

/// Order in which HEFT visits tasks: non-increasing average rank, ties by id,
/// restricted to ready tasks so zero-length tasks cannot overtake a
/// predecessor.
pub fn heft_order(g: &TaskGraph, platform: &Platform) -> Vec<usize> {
    let ranks = compute_rank_avg(g, platform);
    let pos = Priority::Rank(&ranks).positions(g).expect("rank table matches graph");
    let mut missing: Vec<usize> = (0..g.len()).map(|i| g.preds(i).len()).collect();
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..g.len()).filter(|&i| missing[i] == 0).map(|i| Reverse((pos[i], i))).collect();
    let mut order = Vec::with_capacity(g.len());
    while let Some(Reverse((_, i))) = heap.pop() {
        order.push(i);
        for &s in g.succs(i) {
            missing[s] -= 1;
            if missing[s] == 0 {
                heap.push(Reverse((pos[s], s)));
            }
        }
    }
    order
}

/// Earliest start at or after `release` on a machine whose busy intervals
/// are `busy` (sorted by start), for a task of length `p`.
fn earliest_slot(busy: &[(f64, f64)], release: f64, p: f64, mode: HeftMode) -> f64 {
    match mode {
        HeftMode::Append => busy.last().map_or(release, |&(_, f)| release.max(f)),
        HeftMode::Insertion => {
            let mut start = release;
            for &(s, f) in busy {
                if start + p <= s {
                    return start;
                }
                start = start.max(f);
            }
            start
        }
    }
}

/// HEFT: tasks in average-rank order, each placed on the (type, machine,
/// interval) that finishes it earliest. Equal finishes prefer the higher
/// type index, then the lower machine index.
pub fn heft_schedule_with(g: &TaskGraph, platform: &Platform, mode: HeftMode) -> Result<Schedule, OfflineError> {
    validate_graph(g, platform)?;
    let q = platform.num_types();
    let mut busy: Vec<Vec<Vec<(f64, f64)>>> = (0..q).map(|ty| vec![Vec::new(); platform.machines(ty)]).collect();
    let mut finish = vec![0.0f64; g.len()];
    let mut schedule = Schedule::new();

    for i in heft_order(g, platform) {
        let task = g.task(i);
        let release = g.preds(i).iter().map(|&p| finish[p]).fold(0.0, f64::max);
        let mut best: Option<(f64, usize, usize, f64)> = None;
        for ty in (0..q).rev() {
            let Some(p) = task.time(ty) else { continue };
            for (m, intervals) in busy[ty].iter().enumerate() {
                let start = earliest_slot(intervals, release, p, mode);
                let f = start + p;
                let better = match best {
                    None => true,
                    Some((bf, ..)) => f < bf - 1e-12 * bf.abs().max(1.0),
                };
                if better {
                    best = Some((f, ty, m, start));
                }
            }
        }
        let (f, ty, m, start) = best.expect("every task has an allowed type");
        let intervals = &mut busy[ty][m];
        let at = intervals.partition_point(|&(s, _)| s <= start);
        intervals.insert(at, (start, f));
        finish[i] = f;
        schedule.insert(g.id(i), Placement { ty, machine: m, start, finish: f });
    }
    Ok(schedule)
}

/// Solves the relaxation and rounds it.
pub fn hlp_allocate(g: &TaskGraph, platform: &Platform) -> Result<(Allocation, LpSolution), OfflineError> {
    let model = build_hlp(g, platform)?;
    let sol = solve_lp(&model)?;
    Ok((round_allocation(&sol, g), sol))
}

pub fn schedule_allocation(
    g: &TaskGraph,
    platform: &Platform,
    alloc: &Allocation,
    policy: HlpPolicy,
) -> Result<Schedule, OfflineError> {
    match policy {
        HlpPolicy::Est => est_schedule(g, platform, alloc),
        HlpPolicy::Ols => ols_schedule(g, platform, alloc),
    }
}

/// Relaxation, rounding, then EST or OLS. Works for any number of types.
pub fn hlp_pipeline(g: &TaskGraph, platform: &Platform, policy: HlpPolicy) -> Result<Schedule, OfflineError> {
    let (alloc, _) = hlp_allocate(g, platform)?;
    schedule_allocation(g, platform, &alloc, policy)
}
