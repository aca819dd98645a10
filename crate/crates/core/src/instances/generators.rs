use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Platform, Task, TaskGraph, TaskId, CPU};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
}

impl GeneratorError {
    pub fn code(&self) -> &'static str {
        "ParameterOutOfRange"
    }
}

/// Parameters of the fork-join family.
///
/// The graph starts with one sequential task, then repeats `phases` times a
/// fork into `width` parallel tasks followed by a join task, for
/// `1 + phases * (width + 1)` tasks in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForkJoinSpec {
    pub phases: usize,
    pub width: usize,
    pub seed: u64,
    /// Number of resource types, 2 or 3.
    pub q: usize,
}

impl ForkJoinSpec {
    pub fn new(phases: usize, width: usize, seed: u64, q: usize) -> Self {
        ForkJoinSpec { phases, width, seed, q }
    }

    pub fn task_count(&self) -> usize {
        1 + self.phases * (self.width + 1)
    }
}

const SLOW_SHARE: f64 = 0.05;
const SLOW_ACCEL: (f64, f64) = (0.1, 0.5);
const FAST_ACCEL: (f64, f64) = (0.5, 50.0);

/// Draws a fork-join graph.
///
/// CPU times follow a normal law centred on the phase count with a standard
/// deviation of a quarter of it, redrawn below `phases / 100`. Each
/// accelerator type divides the CPU time by an acceleration factor: in every
/// phase `⌈5% · width⌉` parallel tasks get a factor in `[0.1, 0.5]`
/// (they slow down), all other tasks a factor in `[0.5, 50]`.
///
/// Randomness comes from ChaCha8 seeded with `seed`; the initial task uses
/// stream 0 and phase `t` uses stream `t`, so phases can be regenerated
/// independently and the output is identical on every platform.
pub fn gen_forkjoin(spec: &ForkJoinSpec) -> Result<TaskGraph, GeneratorError> {
    if spec.phases == 0 || spec.width == 0 {
        return Err(GeneratorError::ParameterOutOfRange("phases and width must be at least 1".into()));
    }
    if !(2..=3).contains(&spec.q) {
        return Err(GeneratorError::ParameterOutOfRange(format!("q must be 2 or 3, got {}", spec.q)));
    }
    let centre = spec.phases as f64;
    let normal = Normal::new(centre, centre / 4.0).expect("positive deviation");
    let floor = centre / 100.0;
    let cpu_time = |rng: &mut ChaCha8Rng| loop {
        let t = normal.sample(rng);
        if t >= floor {
            return t;
        }
    };
    let accel = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| rng.random_range(lo..=hi);

    let mut tasks = Vec::with_capacity(spec.task_count());
    let mut edges = Vec::new();
    let mut make = |id: u64, cpu: f64, factors: &[f64]| {
        let mut times = vec![cpu];
        times.extend(factors.iter().map(|f| cpu / f));
        tasks.push(Task::new(id, &times));
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(0);
    let cpu = cpu_time(&mut rng);
    let factors: Vec<f64> = (1..spec.q).map(|_| accel(&mut rng, FAST_ACCEL)).collect();
    make(0, cpu, &factors);

    let slow = (SLOW_SHARE * spec.width as f64).ceil() as usize;
    let mut fork = 0u64;
    for phase in 1..=spec.phases {
        rng.set_stream(phase as u64);
        let base = fork + 1;
        let join = base + spec.width as u64;
        let cpu: Vec<f64> = (0..=spec.width).map(|_| cpu_time(&mut rng)).collect();
        // factors[ty][i] for accelerator types 1..q, index `width` is the join
        let mut factors = Vec::with_capacity(spec.q - 1);
        for _ in 1..spec.q {
            let mut slow_mask = vec![false; spec.width];
            for i in index::sample(&mut rng, spec.width, slow.min(spec.width)) {
                slow_mask[i] = true;
            }
            let per_task: Vec<f64> = (0..=spec.width)
                .map(|i| {
                    let range = if i < spec.width && slow_mask[i] { SLOW_ACCEL } else { FAST_ACCEL };
                    accel(&mut rng, range)
                })
                .collect();
            factors.push(per_task);
        }
        for i in 0..=spec.width {
            let f: Vec<f64> = factors.iter().map(|per| per[i]).collect();
            make(base + i as u64, cpu[i], &f);
        }
        for i in 0..spec.width as u64 {
            edges.push((TaskId(fork), TaskId(base + i)));
            edges.push((TaskId(base + i), TaskId(join)));
        }
        fork = join;
    }
    Ok(TaskGraph::new(spec.q, tasks, edges).expect("fork-join construction is a valid DAG"))
}

/// Independent tasks on which HEFT is far from optimal, for `1 ≤ k ≤ √m`.
///
/// For `i = 1..m` and `r = m / (m + k)`: set `A_i` holds `k` tasks with both
/// times `r^i`; set `B_i` holds `m` tasks with CPU time `r^i` and GPU time
/// `(k / m²) r^m`.
pub fn gen_heft_adversary(m: usize, k: usize) -> Result<(TaskGraph, Platform), GeneratorError> {
    if k == 0 || k * k > m {
        return Err(GeneratorError::ParameterOutOfRange(format!("need 1 <= k <= sqrt(m), got m={m}, k={k}")));
    }
    let (mf, kf) = (m as f64, k as f64);
    let r = mf / (mf + kf);
    let b_gpu = kf / (mf * mf) * r.powi(m as i32);
    let mut tasks = Vec::with_capacity(k * m + m * m);
    let mut id = 0u64;
    for i in 1..=m {
        let ri = r.powi(i as i32);
        for _ in 0..k {
            tasks.push(Task::new(id, &[ri, ri]).with_label(format!("A{i}")));
            id += 1;
        }
        for _ in 0..m {
            tasks.push(Task::new(id, &[ri, b_gpu]).with_label(format!("B{i}")));
            id += 1;
        }
    }
    let graph = TaskGraph::new(2, tasks, vec![]).expect("independent tasks");
    Ok((graph, Platform::hybrid(m, k).expect("m, k >= 1")))
}

/// Instance on which the rounded relaxation followed by EST is close to six
/// times the LP bound, on `m` CPUs and `m` GPUs with `m ≥ 3`.
///
/// Ids `0..=2m` are the `B1` tasks (CPU 2m−1, GPU 1), ids `2m+1..=4m+1` the
/// `B2` tasks (CPU 1, GPU 2m−1), each depending on every `B1` task, and the
/// last id is the CPU-only task `A` of length `m(2m+1)/(m−1)`.
pub fn gen_hlp_adversary(m: usize) -> Result<(TaskGraph, Platform), GeneratorError> {
    if m < 3 {
        return Err(GeneratorError::ParameterOutOfRange(format!("need m >= 3, got {m}")));
    }
    let mf = m as f64;
    let set = 2 * m as u64 + 1;
    let long = 2.0 * mf - 1.0;
    let mut tasks = Vec::with_capacity(2 * set as usize + 1);
    for id in 0..set {
        tasks.push(Task::new(id, &[long, 1.0]).with_label("B1"));
    }
    for id in set..2 * set {
        tasks.push(Task::new(id, &[1.0, long]).with_label("B2"));
    }
    let a_time = mf * (2.0 * mf + 1.0) / (mf - 1.0);
    tasks.push(Task::from_options(2 * set, vec![Some(a_time), None]).with_label("A"));
    debug_assert!(tasks.last().unwrap().is_allowed(CPU));
    let edges = (0..set)
        .flat_map(|b1| (set..2 * set).map(move |b2| (TaskId(b1), TaskId(b2))))
        .collect();
    let graph = TaskGraph::new(2, tasks, edges).expect("bipartite DAG");
    Ok((graph, Platform::hybrid(m, m).expect("m >= 3")))
}

/// Instance on which ER-LS is `√(m/k)` times worse than optimal, `1 ≤ k ≤ m`.
///
/// Ids `0..k` are independent `A` tasks with both times `√m`; ids `k..k+m`
/// form the chain `B_1 ≺ … ≺ B_m` with CPU time `√m` and GPU time `√k`. The
/// natural arrival order (ascending id among ready tasks) presents every `A`
/// task first and then the chain.
pub fn gen_erls_adversary(m: usize, k: usize) -> Result<(TaskGraph, Platform), GeneratorError> {
    if k == 0 || k > m {
        return Err(GeneratorError::ParameterOutOfRange(format!("need 1 <= k <= m, got m={m}, k={k}")));
    }
    let (sm, sk) = ((m as f64).sqrt(), (k as f64).sqrt());
    let mut tasks = Vec::with_capacity(m + k);
    for id in 0..k as u64 {
        tasks.push(Task::new(id, &[sm, sm]).with_label("A"));
    }
    for i in 0..m as u64 {
        tasks.push(Task::new(k as u64 + i, &[sm, sk]).with_label(format!("B{}", i + 1)));
    }
    let edges = (0..m as u64 - 1).map(|i| (TaskId(k as u64 + i), TaskId(k as u64 + i + 1))).collect();
    let graph = TaskGraph::new(2, tasks, edges).expect("chain plus antichain");
    Ok((graph, Platform::hybrid(m, k).expect("m, k >= 1")))
}
