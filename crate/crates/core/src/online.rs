//! Online scheduling: tasks arrive one by one in a precedence-respecting
//! order and each is committed to a (type, machine, start) at arrival.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{validate_graph, GraphError, Platform, Task, TaskGraph, TaskId, CPU, GPU};
use crate::schedule::{Placement, Schedule};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OnlineError {
    #[error("task {task} arrived before its predecessor {pred} was committed")]
    PredecessorNotCommitted { task: TaskId, pred: TaskId },
    #[error("task {0} is not in the graph")]
    UnknownTask(TaskId),
    #[error("task {0} arrived twice")]
    AlreadyCommitted(TaskId),
    #[error("policy {policy} needs exactly two resource types, platform has {found}")]
    RequiresTwoTypes { policy: String, found: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl OnlineError {
    pub fn code(&self) -> &'static str {
        match self {
            OnlineError::PredecessorNotCommitted { .. } => "PredecessorNotCommitted",
            OnlineError::UnknownTask(_) => "UnknownTask",
            OnlineError::AlreadyCommitted(_) => "AlreadyCommitted",
            OnlineError::RequiresTwoTypes { .. } => "RequiresTwoTypes",
            OnlineError::Graph(e) => e.code(),
        }
    }
}

/// How the arrival order is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalMode {
    /// Smallest id among the ready tasks.
    Natural,
    /// Uniform choice among the ready tasks, from ChaCha8 seeded with the value.
    RandomTopo(u64),
}

impl FromStr for ArrivalMode {
    type Err = String;

    /// Parses `natural` or `random:SEED`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "natural" => Ok(ArrivalMode::Natural),
            Some(("random", seed)) => {
                seed.parse().map(ArrivalMode::RandomTopo).map_err(|_| format!("invalid arrival seed {seed:?}"))
            }
            _ => Err(format!("unknown arrival mode {s:?}, expected natural or random:SEED")),
        }
    }
}

impl fmt::Display for ArrivalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArrivalMode::Natural => write!(f, "natural"),
            ArrivalMode::RandomTopo(seed) => write!(f, "random:{seed}"),
        }
    }
}

/// A topological order of the graph under the given mode.
pub fn arrival_stream(g: &TaskGraph, mode: ArrivalMode) -> Vec<TaskId> {
    let seed = match mode {
        ArrivalMode::Natural => return g.topological_order(),
        ArrivalMode::RandomTopo(seed) => seed,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut missing: Vec<usize> = (0..g.len()).map(|i| g.preds(i).len()).collect();
    let mut ready: Vec<usize> = (0..g.len()).filter(|&i| missing[i] == 0).collect();
    let mut order = Vec::with_capacity(g.len());
    while !ready.is_empty() {
        // sorted by id so the draw does not depend on insertion history
        ready.sort_unstable_by_key(|&i| g.id(i));
        let i = ready.remove(rng.random_range(0..ready.len()));
        order.push(g.id(i));
        for &s in g.succs(i) {
            missing[s] -= 1;
            if missing[s] == 0 {
                ready.push(s);
            }
        }
    }
    order
}

/// Two-type allocation rules comparing CPU and GPU times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// CPU iff `p̄/m ≤ p̲/k`.
    R1,
    /// CPU iff `p̄/√m ≤ p̲/√k`.
    R2,
    /// CPU iff `p̄ ≤ p̲`.
    R3,
}

/// The only allowed type when one side is forbidden.
fn forced_type(task: &Task) -> Option<usize> {
    match (task.is_allowed(CPU), task.is_allowed(GPU)) {
        (true, false) => Some(CPU),
        (false, true) => Some(GPU),
        _ => None,
    }
}

pub fn rule_allocate(task: &Task, platform: &Platform, rule: Rule) -> usize {
    if let Some(ty) = forced_type(task) {
        return ty;
    }
    let (cpu, gpu) = (task.cpu_time().unwrap(), task.gpu_time().unwrap());
    let (m, k) = (platform.cpus() as f64, platform.gpus() as f64);
    let on_cpu = match rule {
        Rule::R1 => cpu / m <= gpu / k,
        Rule::R2 => cpu / m.sqrt() <= gpu / k.sqrt(),
        Rule::R3 => cpu <= gpu,
    };
    if on_cpu {
        CPU
    } else {
        GPU
    }
}

/// Online policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnlinePolicy {
    Erls,
    Eft,
    /// Same as `R3`.
    Greedy,
    /// Fair coin per task from ChaCha8 seeded with the value.
    Random(u64),
    Rule(Rule),
}

impl OnlinePolicy {
    pub fn name(&self) -> &'static str {
        match self {
            OnlinePolicy::Erls => "erls",
            OnlinePolicy::Eft => "eft",
            OnlinePolicy::Greedy => "greedy",
            OnlinePolicy::Random(_) => "random",
            OnlinePolicy::Rule(Rule::R1) => "r1",
            OnlinePolicy::Rule(Rule::R2) => "r2",
            OnlinePolicy::Rule(Rule::R3) => "r3",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            OnlinePolicy::Random(seed) => Some(*seed),
            _ => None,
        }
    }

    /// Parses a policy name; `seed` is used by `random` only.
    pub fn parse(name: &str, seed: u64) -> Option<Self> {
        Some(match name {
            "erls" => OnlinePolicy::Erls,
            "eft" => OnlinePolicy::Eft,
            "greedy" => OnlinePolicy::Greedy,
            "random" => OnlinePolicy::Random(seed),
            "r1" => OnlinePolicy::Rule(Rule::R1),
            "r2" => OnlinePolicy::Rule(Rule::R2),
            "r3" => OnlinePolicy::Rule(Rule::R3),
            _ => return None,
        })
    }
}

/// One committed decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub task: TaskId,
    #[serde(rename = "type")]
    pub ty: usize,
    pub machine: usize,
    pub start: f64,
    pub finish: f64,
    /// The task could run on one side only, so the policy was bypassed.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub forced: bool,
}

/// Commitments made so far. Machines only ever grow at their end.
#[derive(Debug, Clone)]
pub struct OnlineState {
    avail: Vec<Vec<f64>>,
    completion: HashMap<TaskId, f64>,
    schedule: Schedule,
}

impl OnlineState {
    pub fn new(platform: &Platform) -> Self {
        OnlineState {
            avail: (0..platform.num_types()).map(|ty| vec![0.0; platform.machines(ty)]).collect(),
            completion: HashMap::new(),
            schedule: Schedule::new(),
        }
    }

    /// Earliest time at which some machine of type `ty` is idle for good.
    pub fn earliest_idle(&self, ty: usize) -> f64 {
        self.avail[ty].iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Earliest time at which some GPU is idle for good.
    pub fn tau_gpu(&self) -> f64 {
        self.earliest_idle(GPU)
    }

    pub fn completion(&self, id: TaskId) -> Option<f64> {
        self.completion.get(&id).copied()
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// Largest completion time among the predecessors of task `idx`.
    pub fn release(&self, g: &TaskGraph, idx: usize) -> Result<f64, OnlineError> {
        g.preds(idx).iter().try_fold(0.0f64, |acc, &p| {
            self.completion(g.id(p))
                .map(|c| acc.max(c))
                .ok_or(OnlineError::PredecessorNotCommitted { task: g.id(idx), pred: g.id(p) })
        })
    }

    /// `max(τ_gpu, release)`: the earliest GPU start for task `idx`.
    pub fn gpu_ready(&self, g: &TaskGraph, idx: usize) -> Result<f64, OnlineError> {
        Ok(self.tau_gpu().max(self.release(g, idx)?))
    }

    /// Finish of task `idx` if appended on `(ty, machine)`.
    fn finish_on(&self, g: &TaskGraph, idx: usize, ty: usize, machine: usize, release: f64) -> (f64, f64) {
        let start = release.max(self.avail[ty][machine]);
        (start, start + g.task(idx).time(ty).expect("allowed type"))
    }

    /// Appends task `idx` on the earliest-available machine of `ty`.
    fn commit(&mut self, g: &TaskGraph, idx: usize, ty: usize, release: f64) -> Placement {
        let avail = &self.avail[ty];
        let mut machine = 0;
        for (m, &a) in avail.iter().enumerate() {
            if a < avail[machine] {
                machine = m;
            }
        }
        self.commit_on(g, idx, ty, machine, release)
    }

    fn commit_on(&mut self, g: &TaskGraph, idx: usize, ty: usize, machine: usize, release: f64) -> Placement {
        let (start, finish) = self.finish_on(g, idx, ty, machine, release);
        self.avail[ty][machine] = finish;
        self.completion.insert(g.id(idx), finish);
        let placement = Placement { ty, machine, start, finish };
        self.schedule.insert(g.id(idx), placement);
        placement
    }
}

/// ER-LS type choice: GPU when `p̄ ≥ max(τ_gpu, release) + p̲`, otherwise R2.
pub fn erls_decide(g: &TaskGraph, id: TaskId, state: &OnlineState, platform: &Platform) -> Result<usize, OnlineError> {
    let idx = g.index_of(id).ok_or(OnlineError::UnknownTask(id))?;
    let task = g.task(idx);
    let r_gpu = state.gpu_ready(g, idx)?;
    if let Some(ty) = forced_type(task) {
        return Ok(ty);
    }
    if task.cpu_time().unwrap() >= r_gpu + task.gpu_time().unwrap() {
        Ok(GPU)
    } else {
        Ok(rule_allocate(task, platform, Rule::R2))
    }
}

/// Incremental online scheduler: feed tasks with [`OnlineScheduler::arrive`].
pub struct OnlineScheduler<'g> {
    g: &'g TaskGraph,
    platform: Platform,
    policy: OnlinePolicy,
    state: OnlineState,
    coin: Option<ChaCha8Rng>,
    log: Vec<Decision>,
}

impl<'g> OnlineScheduler<'g> {
    pub fn new(g: &'g TaskGraph, platform: &Platform, policy: OnlinePolicy) -> Result<Self, OnlineError> {
        validate_graph(g, platform)?;
        if policy != OnlinePolicy::Eft && platform.num_types() != 2 {
            return Err(OnlineError::RequiresTwoTypes {
                policy: policy.name().to_string(),
                found: platform.num_types(),
            });
        }
        Ok(OnlineScheduler {
            g,
            platform: platform.clone(),
            policy,
            state: OnlineState::new(platform),
            coin: policy.seed().map(ChaCha8Rng::seed_from_u64),
            log: Vec::new(),
        })
    }

    pub fn state(&self) -> &OnlineState {
        &self.state
    }

    pub fn log(&self) -> &[Decision] {
        &self.log
    }

    /// Commits the arriving task and returns the decision.
    pub fn arrive(&mut self, id: TaskId) -> Result<Decision, OnlineError> {
        let g = self.g;
        let idx = g.index_of(id).ok_or(OnlineError::UnknownTask(id))?;
        if self.state.completion(id).is_some() {
            return Err(OnlineError::AlreadyCommitted(id));
        }
        let release = self.state.release(g, idx)?;
        let task = g.task(idx);
        let forced = self.platform.num_types() == 2 && forced_type(task).is_some();
        let placement = match self.policy {
            OnlinePolicy::Eft => self.eft_place(idx, release),
            policy => {
                let ty = match policy {
                    OnlinePolicy::Erls => erls_decide(g, id, &self.state, &self.platform)?,
                    OnlinePolicy::Greedy => rule_allocate(task, &self.platform, Rule::R3),
                    OnlinePolicy::Rule(rule) => rule_allocate(task, &self.platform, rule),
                    OnlinePolicy::Random(_) => {
                        let flip = self.coin.as_mut().expect("random policy has a coin").next_u64() & 1;
                        let ty = if flip == 0 { CPU } else { GPU };
                        forced_type(task).unwrap_or(ty)
                    }
                    OnlinePolicy::Eft => unreachable!(),
                };
                self.state.commit(g, idx, ty, release)
            }
        };
        let decision = Decision {
            task: id,
            ty: placement.ty,
            machine: placement.machine,
            start: placement.start,
            finish: placement.finish,
            forced,
        };
        self.log.push(decision);
        Ok(decision)
    }

    /// Earliest finish over every allowed (type, machine); ties prefer the
    /// higher type index, then the lower machine index.
    fn eft_place(&mut self, idx: usize, release: f64) -> Placement {
        let task = self.g.task(idx);
        let mut best: Option<(f64, usize, usize)> = None;
        for ty in (0..self.platform.num_types()).rev().filter(|&ty| task.is_allowed(ty)) {
            for m in 0..self.platform.machines(ty) {
                let (_, f) = self.state.finish_on(self.g, idx, ty, m, release);
                if best.is_none_or(|(bf, ..)| f < bf) {
                    best = Some((f, ty, m));
                }
            }
        }
        let (_, ty, m) = best.expect("task has an allowed type");
        self.state.commit_on(self.g, idx, ty, m, release)
    }

    pub fn finish(self) -> OnlineResult {
        OnlineResult { schedule: self.state.schedule, log: self.log }
    }
}

/// Output of a complete online run.
#[derive(Debug, Clone)]
pub struct OnlineResult {
    pub schedule: Schedule,
    /// Decisions in arrival order.
    pub log: Vec<Decision>,
}

/// Runs `policy` on the whole arrival stream.
pub fn online_run(
    g: &TaskGraph,
    platform: &Platform,
    policy: OnlinePolicy,
    mode: ArrivalMode,
) -> Result<OnlineResult, OnlineError> {
    run_order(g, platform, policy, &arrival_stream(g, mode))
}

/// Runs `policy` on an explicit arrival order (which may be a prefix).
pub fn run_order(
    g: &TaskGraph,
    platform: &Platform,
    policy: OnlinePolicy,
    order: &[TaskId],
) -> Result<OnlineResult, OnlineError> {
    let mut scheduler = OnlineScheduler::new(g, platform, policy)?;
    for &id in order {
        scheduler.arrive(id)?;
    }
    Ok(scheduler.finish())
}
