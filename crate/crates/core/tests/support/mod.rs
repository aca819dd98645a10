#![allow(dead_code)]

use hetsched::{Platform, Task, TaskGraph, TaskId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random DAG over ids `0..n`: edge `i -> j` for `i < j` with probability
/// `density`, times uniform in `[lo, hi]`, each non-CPU type forbidden with
/// probability `forbid`.
pub fn random_dag(rng: &mut ChaCha8Rng, n: usize, q: usize, density: f64, (lo, hi): (f64, f64), forbid: f64) -> TaskGraph {
    let tasks = (0..n as u64)
        .map(|id| {
            let mut times: Vec<Option<f64>> = (0..q).map(|_| Some(rng.random_range(lo..=hi))).collect();
            for t in times.iter_mut().skip(1) {
                if rng.random_bool(forbid) {
                    *t = None;
                }
            }
            Task::from_options(id, times)
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..n as u64 {
        for j in i + 1..n as u64 {
            if rng.random_bool(density) {
                edges.push((TaskId(i), TaskId(j)));
            }
        }
    }
    TaskGraph::new(q, tasks, edges).expect("forward edges form a DAG")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every maximal source-to-sink path, as task indices.
pub fn maximal_paths(g: &TaskGraph) -> Vec<Vec<usize>> {
    fn walk(g: &TaskGraph, i: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        path.push(i);
        if g.succs(i).is_empty() {
            out.push(path.clone());
        }
        for &s in g.succs(i) {
            walk(g, s, path, out);
        }
        path.pop();
    }
    let mut out = Vec::new();
    for i in (0..g.len()).filter(|&i| g.preds(i).is_empty()) {
        walk(g, i, &mut Vec::new(), &mut out);
    }
    out
}

/// `a · z <= b`
struct Cons {
    a: Vec<f64>,
    b: f64,
}

/// Optimum of the allocation relaxation by vertex enumeration.
///
/// Completion times are eliminated: the objective must dominate the length
/// of every maximal path under fractional times, and every type's average
/// load. Fraction variables live in a box; with more than two types the
/// last type's share is `1 - Σ` of the others. Each vertex fixes every
/// variable to a bound or leaves it free, and makes as many general
/// constraints tight as there are free coordinates (plus one for λ).
pub fn lp_oracle(g: &TaskGraph, platform: &Platform) -> f64 {
    let q = g.num_types();
    let n = g.len();
    let per = q - 1;
    let d = n * per + 1;
    let lam = d - 1;
    let big = 0.0;

    // share of type `ty` for task j as an affine function: (coeffs over z, constant)
    let share = |j: usize, ty: usize| -> (Vec<(usize, f64)>, f64) {
        if ty < per {
            (vec![(j * per + ty, 1.0)], 0.0)
        } else {
            ((0..per).map(|t| (j * per + t, -1.0)).collect(), 1.0)
        }
    };
    // contribution of task j's time: Σ_ty share·p (forbidden types are pinned to 0)
    let time = |j: usize| -> (Vec<f64>, f64) {
        let mut a = vec![0.0; d];
        let mut c = 0.0;
        for ty in 0..q {
            let p = g.task(j).time(ty).unwrap_or(big);
            let (coeffs, k) = share(j, ty);
            for (v, w) in coeffs {
                a[v] += w * p;
            }
            c += k * p;
        }
        (a, c)
    };

    let mut cons = Vec::new();
    for path in maximal_paths(g) {
        let mut a = vec![0.0; d];
        let mut c = 0.0;
        for &j in &path {
            let (aj, cj) = time(j);
            for v in 0..d {
                a[v] += aj[v];
            }
            c += cj;
        }
        a[lam] = -1.0;
        cons.push(Cons { a, b: -c });
    }
    for ty in 0..q {
        let m = platform.machines(ty) as f64;
        let mut a = vec![0.0; d];
        let mut c = 0.0;
        for j in 0..n {
            let p = g.task(j).time(ty).unwrap_or(big);
            let (coeffs, k) = share(j, ty);
            for (v, w) in coeffs {
                a[v] += w * p / m;
            }
            c += k * p / m;
        }
        a[lam] = -1.0;
        cons.push(Cons { a, b: -c });
    }
    // box of each fraction variable, plus the implicit last share in [0, 1]
    let mut lower = vec![0.0; d];
    let mut upper = vec![1.0; d];
    for j in 0..n {
        for ty in 0..per {
            if !g.task(j).is_allowed(ty) {
                upper[j * per + ty] = 0.0;
            }
        }
        if per == 1 {
            if !g.task(j).is_allowed(1) {
                lower[j] = 1.0;
            }
        } else {
            let (coeffs, k) = share(j, q - 1);
            let mut a = vec![0.0; d];
            for &(v, w) in &coeffs {
                a[v] = -w;
            }
            if g.task(j).is_allowed(q - 1) {
                // last share >= 0  <=>  Σ others <= 1
                cons.push(Cons { a, b: k });
            } else {
                // last share == 0
                let neg: Vec<f64> = a.iter().map(|x| -x).collect();
                cons.push(Cons { a, b: k });
                cons.push(Cons { a: neg, b: -k });
            }
        }
    }
    lower[lam] = f64::NEG_INFINITY;
    upper[lam] = f64::INFINITY;

    let feasible = |z: &[f64]| {
        (0..d).all(|v| z[v] >= lower[v] - 1e-9 && z[v] <= upper[v] + 1e-9)
            && cons.iter().all(|c| dot(&c.a, z) <= c.b + 1e-9 * c.b.abs().max(1.0))
    };

    let mut best = f64::INFINITY;
    let mut state = vec![0u8; d - 1];
    loop {
        // 0 = at lower, 1 = at upper, 2 = free
        let free: Vec<usize> = (0..d - 1).filter(|&v| state[v] == 2).chain([lam]).collect();
        let mut fixed = vec![0.0; d];
        for v in 0..d - 1 {
            fixed[v] = if state[v] == 1 { upper[v] } else { lower[v] };
        }
        for tight in subsets(cons.len(), free.len()) {
            if let Some(z) = solve_tight(&cons, &tight, &free, &fixed) {
                if z[lam] < best && feasible(&z) {
                    best = z[lam];
                }
            }
        }
        if !advance(&mut state, &lower, &upper) {
            break;
        }
    }
    best
}

fn dot(a: &[f64], z: &[f64]) -> f64 {
    a.iter().zip(z).map(|(x, y)| x * y).sum()
}

/// Next bound state, skipping `upper` and `free` for pinned variables.
fn advance(state: &mut [u8], lower: &[f64], upper: &[f64]) -> bool {
    for v in 0..state.len() {
        let pinned = lower[v] == upper[v];
        if !pinned && state[v] < 2 {
            state[v] += 1;
            return true;
        }
        state[v] = 0;
    }
    false
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Solves the chosen constraints as equalities in the free variables.
fn solve_tight(cons: &[Cons], tight: &[usize], free: &[usize], fixed: &[f64]) -> Option<Vec<f64>> {
    let k = free.len();
    let mut m: Vec<Vec<f64>> = tight
        .iter()
        .map(|&c| {
            let rhs = cons[c].b
                - (0..fixed.len()).filter(|v| !free.contains(v)).map(|v| cons[c].a[v] * fixed[v]).sum::<f64>();
            let mut row: Vec<f64> = free.iter().map(|&v| cons[c].a[v]).collect();
            row.push(rhs);
            row
        })
        .collect();
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=k {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let mut z = fixed.to_vec();
    for (i, &v) in free.iter().enumerate() {
        z[v] = m[i][k] / m[i][i];
    }
    Some(z)
}
