mod support;

use hetsched::bench::{brute_force_opt, lower_bounds};
use hetsched::lp::{build_hlp, round_allocation, solve_lp};
use hetsched::offline::{heft_order, heft_schedule_with, list_schedule, HeftMode, Priority};
use hetsched::online::{arrival_stream, online_run, run_order, rule_allocate, Rule};
use hetsched::{
    est_schedule, heft_schedule, hlp_pipeline, ols_schedule, validate_schedule, Allocation, ArrivalMode, HlpPolicy,
    OnlinePolicy, Platform, Schedule, TaskGraph, TaskId, CPU,
};
use proptest::prelude::*;

const EPS: f64 = 1e-9;

fn instance(seed: u64, n: usize, q: usize, density: f64, forbid: f64) -> TaskGraph {
    support::random_dag(&mut support::rng(seed), n, q, density, (0.5, 10.0), forbid)
}

fn platform(q: usize, m: usize, k: usize) -> Platform {
    let mut counts = vec![m, k];
    if q == 3 {
        counts.push(k.max(2) - 1);
    }
    Platform::new(counts).unwrap()
}

/// No machine of type `ty` sits idle at a start time `t` while some task
/// allocated to `ty` was ready at `t` but started later.
fn assert_non_delay(s: &Schedule, g: &TaskGraph, p: &Platform, alloc: &Allocation) {
    let ready = |i: usize| g.preds(i).iter().map(|&j| s.get(g.id(j)).unwrap().finish).fold(0.0, f64::max);
    for i in 0..g.len() {
        let ty = alloc.type_of(i);
        let r = ready(i);
        let start = s.get(g.id(i)).unwrap().start;
        if start <= r + EPS {
            continue;
        }
        // every machine of ty must be busy throughout [r, start)
        let mut events: Vec<f64> = vec![r];
        events.extend(s.iter().map(|(_, pl)| pl.finish).filter(|&f| f > r && f < start));
        for t in events {
            let busy = s.iter().filter(|(_, pl)| pl.ty == ty && pl.start <= t + EPS && pl.finish > t + EPS).count();
            assert_eq!(busy, p.machines(ty), "type {ty} idles at {t} while task {} waits", g.id(i));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn offline_schedules_are_feasible_and_bounded(
        seed in any::<u64>(), n in 1usize..14, q in 2usize..4, density in 0.0f64..0.6,
        m in 1usize..5, k in 1usize..4,
    ) {
        let g = instance(seed, n, q, density, 0.15);
        let p = platform(q, m, k);
        let b = lower_bounds(&g, &p).unwrap();
        prop_assert!(b.lp_star >= b.cp_min - 1e-7);
        let max_min = g.tasks().iter().map(|t| t.min_time()).fold(0.0, f64::max);
        prop_assert!(b.lp_star >= max_min - 1e-7);
        let factor = (q * (q + 1)) as f64;
        for policy in [HlpPolicy::Est, HlpPolicy::Ols] {
            let s = hlp_pipeline(&g, &p, policy).unwrap();
            validate_schedule(&s, &g, &p).unwrap();
            let mk = s.makespan().unwrap();
            prop_assert!(mk >= b.lp_star * (1.0 - 1e-7));
            prop_assert!(mk <= factor * b.lp_star * (1.0 + 1e-7));
        }
        let heft = heft_schedule(&g, &p).unwrap();
        validate_schedule(&heft, &g, &p).unwrap();
        prop_assert!(heft.makespan().unwrap() >= b.lp_star * (1.0 - 1e-7));
    }

    #[test]
    fn list_schedule_never_idles(
        seed in any::<u64>(), n in 1usize..14, density in 0.0f64..0.7, m in 1usize..4, k in 1usize..3,
    ) {
        let g = instance(seed, n, 2, density, 0.1);
        let p = platform(2, m, k);
        let sol = solve_lp(&build_hlp(&g, &p).unwrap()).unwrap();
        let alloc = round_allocation(&sol, &g);
        for s in [
            ols_schedule(&g, &p, &alloc).unwrap(),
            list_schedule(&g, &p, &alloc, Priority::Id).unwrap(),
        ] {
            validate_schedule(&s, &g, &p).unwrap();
            assert_non_delay(&s, &g, &p, &alloc);
        }
    }

    #[test]
    fn heft_insertion_beats_append_locally(
        seed in any::<u64>(), n in 1usize..14, density in 0.0f64..0.6, m in 1usize..4, k in 1usize..3,
    ) {
        // each committed slot finishes no later than appending at the end of
        // any machine would, given the earlier placements
        let g = instance(seed, n, 2, density, 0.1);
        let p = platform(2, m, k);
        let s = heft_schedule_with(&g, &p, HeftMode::Insertion).unwrap();
        validate_schedule(&s, &g, &p).unwrap();
        let mut placed: Vec<usize> = Vec::new();
        for i in heft_order(&g, &p) {
            let ready = g.preds(i).iter().map(|&j| s.get(g.id(j)).unwrap().finish).fold(0.0, f64::max);
            let mut best_append = f64::INFINITY;
            for ty in g.task(i).allowed_types() {
                for mach in 0..p.machines(ty) {
                    let end = placed
                        .iter()
                        .map(|&j| s.get(g.id(j)).unwrap())
                        .filter(|pl| pl.ty == ty && pl.machine == mach)
                        .map(|pl| pl.finish)
                        .fold(0.0, f64::max);
                    best_append = best_append.min(ready.max(end) + g.task(i).time(ty).unwrap());
                }
            }
            prop_assert!(s.get(g.id(i)).unwrap().finish <= best_append + EPS);
            placed.push(i);
        }
        let append = heft_schedule_with(&g, &p, HeftMode::Append).unwrap();
        validate_schedule(&append, &g, &p).unwrap();
    }

    #[test]
    fn online_policies_are_feasible_and_irrevocable(
        seed in any::<u64>(), n in 1usize..12, density in 0.0f64..0.6, m in 1usize..4, k in 1usize..3,
        arrival_seed in any::<u64>(), coin in any::<u64>(),
    ) {
        let g = instance(seed, n, 2, density, 0.1);
        let p = platform(2, m, k);
        let order = arrival_stream(&g, ArrivalMode::RandomTopo(arrival_seed));
        for name in ["erls", "eft", "greedy", "random", "r1", "r2", "r3"] {
            let policy = OnlinePolicy::parse(name, coin).unwrap();
            let full = run_order(&g, &p, policy, &order).unwrap();
            validate_schedule(&full.schedule, &g, &p).unwrap();
            for (d, id) in full.log.iter().zip(&order) {
                prop_assert_eq!(d.task, *id);
                let ready = g.preds(g.index_of(*id).unwrap()).iter()
                    .map(|&j| full.schedule.get(g.id(j)).unwrap().finish).fold(0.0, f64::max);
                prop_assert!(d.start >= ready);
            }
            for t in 0..order.len() {
                let prefix = run_order(&g, &p, policy, &order[..t]).unwrap();
                prop_assert_eq!(&prefix.log[..], &full.log[..t]);
            }
        }
    }

    #[test]
    fn greedy_matches_list_schedule_in_its_own_order(
        seed in any::<u64>(), n in 1usize..12, density in 0.0f64..0.6, m in 1usize..4, k in 1usize..3,
    ) {
        // arrivals in the list schedule's start order (ties by id) make the
        // online greedy reproduce the list schedule's start times
        let g = instance(seed, n, 2, density, 0.0);
        let p = platform(2, m, k);
        let alloc = Allocation::from_fn(&g, |t| rule_allocate(t, &p, Rule::R3)).unwrap();
        let list = list_schedule(&g, &p, &alloc, Priority::Id).unwrap();
        let mut order: Vec<TaskId> = g.tasks().iter().map(|t| t.id).collect();
        order.sort_by(|a, b| list.get(*a).unwrap().start.total_cmp(&list.get(*b).unwrap().start).then(a.cmp(b)));
        let online = run_order(&g, &p, OnlinePolicy::Greedy, &order).unwrap();
        for (id, pl) in list.iter() {
            let o = online.schedule.get(id).unwrap();
            prop_assert_eq!((o.ty, o.start), (pl.ty, pl.start));
        }
    }

    #[test]
    fn oracle_is_sandwiched(
        seed in any::<u64>(), n in 1usize..7, density in 0.0f64..1.0, m in 1usize..4, k in 1usize..3,
    ) {
        let g = instance(seed, n, 2, density, 0.1);
        let p = platform(2, m, k);
        let opt = brute_force_opt(&g, &p).unwrap();
        let b = lower_bounds(&g, &p).unwrap();
        prop_assert!(opt >= b.lp_star * (1.0 - 1e-7));
        prop_assert!(opt >= b.cp_min - EPS);
        let mut upper = heft_schedule(&g, &p).unwrap().makespan().unwrap();
        for policy in [HlpPolicy::Est, HlpPolicy::Ols] {
            upper = upper.min(hlp_pipeline(&g, &p, policy).unwrap().makespan().unwrap());
        }
        let erls = online_run(&g, &p, OnlinePolicy::Erls, ArrivalMode::Natural).unwrap();
        upper = upper.min(erls.schedule.makespan().unwrap());
        prop_assert!(opt <= upper + EPS);
    }
}

#[test]
fn oracle_matches_exhaustive_list_scheduling_on_independent_tasks() {
    // without precedence every non-delay list schedule is also a serial one,
    // so the minimum over allocations and orders must agree with the oracle
    for seed in 0..40 {
        let g = instance(seed, 5, 2, 0.0, 0.0);
        let p = platform(2, 1 + (seed % 2) as usize, 1);
        let mut best = f64::INFINITY;
        let ids: Vec<TaskId> = g.tasks().iter().map(|t| t.id).collect();
        for mask in 0..1u32 << g.len() {
            let alloc = Allocation::new(&g, (0..g.len()).map(|i| ((mask >> i) & 1) as usize).collect()).unwrap();
            for perm in permutations(&ids) {
                let s = list_schedule(&g, &p, &alloc, Priority::Order(&perm)).unwrap();
                best = best.min(s.makespan().unwrap());
            }
        }
        let opt = brute_force_opt(&g, &p).unwrap();
        assert!((opt - best).abs() < 1e-9, "seed {seed}: oracle {opt}, list {best}");
    }
}

fn permutations(items: &[TaskId]) -> Vec<Vec<TaskId>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

#[test]
fn schedulers_are_deterministic() {
    let g = instance(5, 12, 2, 0.3, 0.1);
    let p = platform(2, 3, 2);
    let alloc = Allocation::from_fn(&g, |t| if t.is_allowed(CPU) { CPU } else { 1 }).unwrap();
    assert_eq!(est_schedule(&g, &p, &alloc).unwrap(), est_schedule(&g, &p, &alloc).unwrap());
    assert_eq!(heft_schedule(&g, &p).unwrap(), heft_schedule(&g, &p).unwrap());
    let a = online_run(&g, &p, OnlinePolicy::Random(3), ArrivalMode::RandomTopo(4)).unwrap();
    let b = online_run(&g, &p, OnlinePolicy::Random(3), ArrivalMode::RandomTopo(4)).unwrap();
    assert_eq!(a.schedule, b.schedule);
}

#[test]
fn list_schedule_any_order_on_relaxation_adversary() {
    // with ascending id (the arrival order) the list schedule matches EST
    let (g, p) = hetsched::instances::gen_hlp_adversary(3).unwrap();
    let alloc = Allocation::from_fn(&g, |t| if t.label.as_deref() == Some("B2") { 1 } else { CPU }).unwrap();
    let order = arrival_stream(&g, ArrivalMode::Natural);
    let s = list_schedule(&g, &p, &alloc, Priority::Order(&order)).unwrap();
    assert_eq!(s.makespan().unwrap(), 30.0);
    // putting the long CPU-only task first changes the outcome
    let mut first_a = order.clone();
    first_a.rotate_right(1);
    let s = list_schedule(&g, &p, &alloc, Priority::Order(&first_a)).unwrap();
    assert_eq!(s.makespan().unwrap(), 30.5);
}
