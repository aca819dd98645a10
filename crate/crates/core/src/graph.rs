//! Task graphs, platforms and allocations.
//!
//! A [`TaskGraph`] is immutable once built: construction checks every
//! structural invariant (unique ids, known edge endpoints, no self-loops or
//! duplicate arcs, acyclicity, finite non-negative times) so the algorithms
//! downstream can index freely. Internally tasks are addressed by their
//! position in the graph (`usize`); [`TaskId`] is the external name.

use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// CPU side in the two-type model.
pub const CPU: usize = 0;
/// GPU side in the two-type model.
pub const GPU: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u64);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("cycle detected: {}", fmt_ids(.0))]
    CycleDetected(Vec<TaskId>),
    #[error("edge ({0}, {1}) references an unknown task")]
    DanglingEdge(TaskId, TaskId),
    #[error("self-loop on task {0}")]
    SelfLoop(TaskId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(TaskId, TaskId),
    #[error("duplicate task id {0}")]
    DuplicateTask(TaskId),
    #[error("task {task} has invalid processing time {value} on type {ty}")]
    NegativeTime { task: TaskId, ty: usize, value: f64 },
    #[error("task {task} has {found} processing times, expected {expected}")]
    ArityMismatch { task: TaskId, expected: usize, found: usize },
    #[error("graph has {graph} resource types but the platform has {platform}")]
    PlatformArity { graph: usize, platform: usize },
    #[error("task {0} cannot run on any resource type")]
    AllTypesForbidden(TaskId),
    #[error("a graph needs at least two resource types, got {0}")]
    TooFewTypes(usize),
}

impl GraphError {
    /// Stable short code used in reports and CSV error rows.
    pub fn code(&self) -> &'static str {
        match self {
            GraphError::CycleDetected(_) => "CycleDetected",
            GraphError::DanglingEdge(..) => "DanglingEdge",
            GraphError::SelfLoop(_) => "SelfLoop",
            GraphError::DuplicateEdge(..) => "DuplicateEdge",
            GraphError::DuplicateTask(_) => "DuplicateTask",
            GraphError::NegativeTime { .. } => "NegativeTime",
            GraphError::ArityMismatch { .. } | GraphError::PlatformArity { .. } => "ArityMismatch",
            GraphError::AllTypesForbidden(_) => "AllTypesForbidden",
            GraphError::TooFewTypes(_) => "TooFewTypes",
        }
    }
}

fn fmt_ids(ids: &[TaskId]) -> String {
    ids.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(" -> ")
}

/// A unit of work with one processing time per resource type.
///
/// `None` marks a type the task cannot run on (an infinite processing time).
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: TaskId,
    pub label: Option<String>,
    times: Vec<Option<f64>>,
}

impl Task {
    /// A task runnable on every type with the given times.
    pub fn new(id: u64, times: &[f64]) -> Self {
        Task { id: TaskId(id), label: None, times: times.iter().map(|&t| Some(t)).collect() }
    }

    pub fn from_options(id: u64, times: Vec<Option<f64>>) -> Self {
        Task { id: TaskId(id), label: None, times }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn forbid(mut self, ty: usize) -> Self {
        self.times[ty] = None;
        self
    }

    pub fn arity(&self) -> usize {
        self.times.len()
    }

    /// Processing time on `ty`, or `None` when the type is forbidden.
    pub fn time(&self, ty: usize) -> Option<f64> {
        self.times.get(ty).copied().flatten()
    }

    pub fn times(&self) -> &[Option<f64>] {
        &self.times
    }

    pub fn is_allowed(&self, ty: usize) -> bool {
        self.time(ty).is_some()
    }

    pub fn forbidden(&self) -> BTreeSet<usize> {
        (0..self.times.len()).filter(|&q| self.times[q].is_none()).collect()
    }

    pub fn allowed_types(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.times.len()).filter(move |&q| self.times[q].is_some())
    }

    /// Smallest processing time over the allowed types.
    pub fn min_time(&self) -> f64 {
        self.times.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// CPU time of a two-type task (p̄).
    pub fn cpu_time(&self) -> Option<f64> {
        self.time(CPU)
    }

    /// GPU time of a two-type task (p̲).
    pub fn gpu_time(&self) -> Option<f64> {
        self.time(GPU)
    }

    fn check(&self, q: usize) -> Result<(), GraphError> {
        if self.times.len() != q {
            return Err(GraphError::ArityMismatch { task: self.id, expected: q, found: self.times.len() });
        }
        for (ty, t) in self.times.iter().enumerate() {
            if let Some(t) = *t {
                if !t.is_finite() || t < 0.0 {
                    return Err(GraphError::NegativeTime { task: self.id, ty, value: t });
                }
            }
        }
        if self.times.iter().all(Option::is_none) {
            return Err(GraphError::AllTypesForbidden(self.id));
        }
        Ok(())
    }
}

/// Ordered list of resource types with a machine count per type.
///
/// Index 0 is the CPU side (`m` machines), index 1 the GPU side (`k`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Platform {
    counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlatformError {
    #[error("a platform needs at least two resource types, got {0}")]
    TooFewTypes(usize),
    #[error("resource type {0} has no machines")]
    EmptyType(usize),
    #[error("invalid platform string {0:?}")]
    Parse(String),
}

impl Platform {
    pub fn new(counts: Vec<usize>) -> Result<Self, PlatformError> {
        if counts.len() < 2 {
            return Err(PlatformError::TooFewTypes(counts.len()));
        }
        if let Some(q) = counts.iter().position(|&c| c == 0) {
            return Err(PlatformError::EmptyType(q));
        }
        Ok(Platform { counts })
    }

    /// `m` CPUs and `k` GPUs.
    pub fn hybrid(m: usize, k: usize) -> Result<Self, PlatformError> {
        Platform::new(vec![m, k])
    }

    pub fn num_types(&self) -> usize {
        self.counts.len()
    }

    pub fn machines(&self, ty: usize) -> usize {
        self.counts[ty]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total_machines(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn cpus(&self) -> usize {
        self.counts[CPU]
    }

    pub fn gpus(&self) -> usize {
        self.counts[GPU]
    }
}

impl FromStr for Platform {
    type Err = PlatformError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let counts = s
            .split(',')
            .map(|part| part.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| PlatformError::Parse(s.to_string()))?;
        Platform::new(counts)
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// A validated precedence DAG.
#[derive(Debug, Clone)]
pub struct TaskGraph {
    q: usize,
    tasks: Vec<Task>,
    edges: Vec<(TaskId, TaskId)>,
    index: HashMap<TaskId, usize>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl PartialEq for TaskGraph {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.tasks == other.tasks && self.edges == other.edges
    }
}

impl TaskGraph {
    /// Builds a graph over `q` resource types, rejecting any invariant violation.
    pub fn new(q: usize, tasks: Vec<Task>, edges: Vec<(TaskId, TaskId)>) -> Result<Self, GraphError> {
        if q < 2 {
            return Err(GraphError::TooFewTypes(q));
        }
        let mut index = HashMap::with_capacity(tasks.len());
        for (i, task) in tasks.iter().enumerate() {
            if index.insert(task.id, i).is_some() {
                return Err(GraphError::DuplicateTask(task.id));
            }
            task.check(q)?;
        }
        let n = tasks.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        let mut seen = HashSet::with_capacity(edges.len());
        for &(a, b) in &edges {
            let (Some(&i), Some(&j)) = (index.get(&a), index.get(&b)) else {
                return Err(GraphError::DanglingEdge(a, b));
            };
            if i == j {
                return Err(GraphError::SelfLoop(a));
            }
            if !seen.insert((i, j)) {
                return Err(GraphError::DuplicateEdge(a, b));
            }
            succs[i].push(j);
            preds[j].push(i);
        }
        let mut graph = TaskGraph { q, tasks, edges, index, preds, succs, topo: Vec::new() };
        graph.topo = graph.kahn()?;
        Ok(graph)
    }

    /// Kahn's algorithm with a min-heap on task id so the order is canonical.
    fn kahn(&self) -> Result<Vec<usize>, GraphError> {
        let n = self.tasks.len();
        let mut indegree: Vec<usize> = self.preds.iter().map(Vec::len).collect();
        let mut heap: BinaryHeap<Reverse<(TaskId, usize)>> = (0..n)
            .filter(|&i| indegree[i] == 0)
            .map(|i| Reverse((self.tasks[i].id, i)))
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse((_, i))) = heap.pop() {
            order.push(i);
            for &j in &self.succs[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    heap.push(Reverse((self.tasks[j].id, j)));
                }
            }
        }
        if order.len() == n {
            return Ok(order);
        }
        Err(GraphError::CycleDetected(self.find_cycle(&indegree)))
    }

    /// Walks predecessors inside the unsorted remainder until a node repeats.
    fn find_cycle(&self, indegree: &[usize]) -> Vec<TaskId> {
        let start = (0..self.tasks.len()).find(|&i| indegree[i] > 0).expect("cycle remainder");
        let mut pos = HashMap::new();
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            if let Some(&p) = pos.get(&cur) {
                let mut cycle: Vec<TaskId> = path[p..].iter().map(|&i: &usize| self.tasks[i].id).collect();
                cycle.reverse();
                cycle.push(cycle[0]);
                return cycle;
            }
            pos.insert(cur, path.len());
            path.push(cur);
            cur = *self.preds[cur].iter().find(|&&p| indegree[p] > 0).expect("node in a cycle has a cyclic predecessor");
        }
    }

    pub fn num_types(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, idx: usize) -> &Task {
        &self.tasks[idx]
    }

    pub fn edges(&self) -> &[(TaskId, TaskId)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, id: TaskId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn id(&self, idx: usize) -> TaskId {
        self.tasks[idx].id
    }

    /// In-neighbours (Γ⁻) of a task, by index.
    pub fn preds(&self, idx: usize) -> &[usize] {
        &self.preds[idx]
    }

    /// Out-neighbours (Γ⁺) of a task, by index.
    pub fn succs(&self, idx: usize) -> &[usize] {
        &self.succs[idx]
    }

    /// Canonical topological order as task indices.
    pub fn topo_indices(&self) -> &[usize] {
        &self.topo
    }

    /// Every task once, every edge forward, ties broken by ascending id.
    pub fn topological_order(&self) -> Vec<TaskId> {
        self.topo.iter().map(|&i| self.tasks[i].id).collect()
    }

    /// Longest path where each task weighs its smallest allowed time.
    pub fn critical_path_min(&self) -> f64 {
        let mut finish = vec![0.0f64; self.len()];
        let mut best = 0.0f64;
        for &i in &self.topo {
            let ready = self.preds[i].iter().map(|&p| finish[p]).fold(0.0, f64::max);
            finish[i] = ready + self.tasks[i].min_time();
            best = best.max(finish[i]);
        }
        best
    }

    /// Sum of all finite processing times.
    pub fn total_finite_time(&self) -> f64 {
        self.tasks.iter().flat_map(|t| t.times.iter().flatten()).sum()
    }
}

/// Checks the graph against a platform. The structural invariants are
/// already enforced by [`TaskGraph::new`]; what remains is arity.
pub fn validate_graph(g: &TaskGraph, platform: &Platform) -> Result<(), GraphError> {
    if g.num_types() != platform.num_types() {
        return Err(GraphError::PlatformArity { graph: g.num_types(), platform: platform.num_types() });
    }
    for task in g.tasks() {
        task.check(platform.num_types())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocationError {
    #[error("allocation covers {found} tasks, graph has {expected}")]
    NotTotal { expected: usize, found: usize },
    #[error("task {task} allocated to forbidden type {ty}")]
    Forbidden { task: TaskId, ty: usize },
}

/// Task → resource type map, indexed by task position in the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    types: Vec<usize>,
}

impl Allocation {
    pub fn new(g: &TaskGraph, types: Vec<usize>) -> Result<Self, AllocationError> {
        if types.len() != g.len() {
            return Err(AllocationError::NotTotal { expected: g.len(), found: types.len() });
        }
        for (i, &ty) in types.iter().enumerate() {
            if !g.task(i).is_allowed(ty) {
                return Err(AllocationError::Forbidden { task: g.id(i), ty });
            }
        }
        Ok(Allocation { types })
    }

    pub fn from_fn(g: &TaskGraph, f: impl Fn(&Task) -> usize) -> Result<Self, AllocationError> {
        Allocation::new(g, g.tasks().iter().map(f).collect())
    }

    /// Type of the task at index `idx`.
    pub fn type_of(&self, idx: usize) -> usize {
        self.types[idx]
    }

    pub fn types(&self) -> &[usize] {
        &self.types
    }

    /// Processing time of task `idx` on its allocated type.
    pub fn time_of(&self, g: &TaskGraph, idx: usize) -> f64 {
        g.task(idx).time(self.types[idx]).expect("allocation respects forbidden types")
    }
}

/// Upward ranks indexed by task position.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    ranks: Vec<f64>,
}

impl RankTable {
    pub fn rank(&self, idx: usize) -> f64 {
        self.ranks[idx]
    }

    pub fn get(&self, g: &TaskGraph, id: TaskId) -> Option<f64> {
        g.index_of(id).map(|i| self.ranks[i])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.ranks
    }

    /// Task indices by non-increasing rank, ties by ascending id.
    pub fn order(&self, g: &TaskGraph) -> Vec<usize> {
        let mut order: Vec<usize> = (0..g.len()).collect();
        order.sort_by(|&a, &b| self.ranks[b].total_cmp(&self.ranks[a]).then(g.id(a).cmp(&g.id(b))));
        order
    }

    fn upward(g: &TaskGraph, weight: impl Fn(usize) -> f64) -> Self {
        let mut ranks = vec![0.0; g.len()];
        for &i in g.topo_indices().iter().rev() {
            let tail = g.succs(i).iter().map(|&s| ranks[s]).fold(0.0, f64::max);
            ranks[i] = weight(i) + tail;
        }
        RankTable { ranks }
    }
}

/// Allocation-aware rank: own allocated time plus the largest successor rank.
pub fn compute_rank_alloc(g: &TaskGraph, alloc: &Allocation) -> RankTable {
    RankTable::upward(g, |i| alloc.time_of(g, i))
}

/// Machine-weighted average time used as the HEFT upward rank.
///
/// A forbidden type contributes a penalty of ten times the sum of all finite
/// processing times in the graph.
pub fn compute_rank_avg(g: &TaskGraph, platform: &Platform) -> RankTable {
    let penalty = 10.0 * g.total_finite_time();
    let total = platform.total_machines() as f64;
    RankTable::upward(g, |i| {
        let task = g.task(i);
        let weighted: f64 = (0..platform.num_types())
            .map(|q| platform.machines(q) as f64 * task.time(q).unwrap_or(penalty))
            .sum();
        weighted / total
    })
}
