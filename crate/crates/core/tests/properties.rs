mod common;

use dagrta::gen::{generate_taskset, CostMode, DeadlineMode, GenParams, UTILIZATION_SLACK};
use dagrta::graph::{critical_path_length, max_parallelism, timing_profile};
use dagrta::io::{parse_task_set, to_json};
use dagrta::model::{validate, Node, RawTask, TaskSet};
use dagrta::rta::{analyze, interference_basic, interference_ll, AnalysisConfig, Method, Termination, Verdict};
use dagrta::sim::{simulate, validate_trace, Scenario};
use dagrta::workload::{LLTask, RequestBounds, WorkloadContext};
use dagrta::Time;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{int, random_dag};

fn small_params(seed: u64, cores: usize, fraction: f64) -> GenParams {
    GenParams {
        n_tasks: cores + 1,
        cores,
        nodes: (2, 7),
        utilization: fraction * cores as f64,
        deadline_mode: if seed % 2 == 0 { DeadlineMode::Implicit } else { DeadlineMode::Uniform },
        cost_mode: if seed % 3 == 0 { CostMode::Half } else { CostMode::Fixed },
        seed,
        ..GenParams::default()
    }
}

fn single_node_set(specs: &[(i64, i64, i64)]) -> TaskSet {
    let tasks = specs
        .iter()
        .enumerate()
        .map(|(i, &(c, d, p))| {
            validate(&RawTask {
                id: format!("s{i}"),
                nodes: vec![Node::fixed("v", int(c))],
                edges: vec![],
                deadline: int(d),
                period: int(p),
            })
            .unwrap()
        })
        .collect();
    TaskSet::new(tasks, 1).unwrap().deadline_monotonic()
}

// Classic fixed-point test on sequential tasks driven by the reference
// interference bound.
fn ll_responses(set: &TaskSet) -> Vec<Option<Time>> {
    let mut higher: Vec<LLTask> = Vec::new();
    let mut out = Vec::new();
    for task in set.tasks() {
        if out.iter().any(Option::is_none) {
            out.push(None);
            continue;
        }
        let c = task.total_wcet().clone();
        let mut r = c.clone();
        let bound = loop {
            let next = &c + &interference_ll(&higher, set.cores(), &r);
            if next == r {
                break Some(r);
            }
            if &next > task.deadline() {
                break None;
            }
            r = next;
        };
        if let Some(r) = &bound {
            higher.push(LLTask::new(c, task.deadline().clone(), task.period().clone(), r.clone()));
        }
        out.push(bound);
    }
    out
}

fn single_node_specs() -> impl Strategy<Value = Vec<(i64, i64, i64)>> {
    prop::collection::vec(
        (1i64..10, 0i64..30, 0i64..=100).prop_map(|(c, extra, pick)| {
            let p = c + extra;
            (c, c + (p - c) * pick / 100, p)
        }),
        2..6,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn workload_bounds_are_ordered_and_monotone(seed in any::<u64>(), cores in 1usize..5, k in 0i64..=8, steps in prop::collection::vec(0i64..400, 2..8)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let task = random_dag(&mut rng, 6, 8, 0.35);
        let profile = timing_profile(&task, cores);
        let room = task.deadline() - &profile.r_isolated;
        let ctx = WorkloadContext::new(&task, &profile, &profile.r_isolated + &(&room * &Time::new(k, 8))).unwrap();
        let nc = ctx.no_carry_in();
        let mut deltas: Vec<Time> = steps.iter().map(|&s| task.period() * &Time::new(s, 100)).collect();
        deltas.sort();
        for d in &deltas {
            prop_assert!(ctx.window_max(d) >= nc.window_max(d));
            prop_assert!(ctx.upper(d) >= ctx.lower(d));
            prop_assert!(nc.upper(d) >= nc.lower(d));
        }
        for w in deltas.windows(2) {
            prop_assert!(ctx.window_max(&w[1]) >= ctx.window_max(&w[0]));
            prop_assert!(nc.window_max(&w[1]) >= nc.window_max(&w[0]));
        }
    }

    #[test]
    fn larger_carry_in_slack_never_lowers_the_bound(seed in any::<u64>(), a in 0i64..=8, b in 0i64..=8, step in 0i64..400) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let task = random_dag(&mut rng, 6, 8, 0.35);
        let profile = timing_profile(&task, 2);
        let room = task.deadline() - &profile.r_isolated;
        let (lo, hi) = (a.min(b), a.max(b));
        let at = |k: i64| WorkloadContext::new(&task, &profile, &profile.r_isolated + &(&room * &Time::new(k, 8))).unwrap();
        let delta = task.period() * &Time::new(step, 100);
        prop_assert!(at(hi).window_max(&delta) >= at(lo).window_max(&delta));
    }

    #[test]
    fn traces_are_monotone_and_limited_dominates(seed in any::<u64>(), cores in 1usize..5, fraction in 0.1f64..0.9) {
        let Ok(set) = generate_taskset(&small_params(seed, cores, fraction)) else { return Ok(()) };
        let basic = analyze(&set, &AnalysisConfig::with_method(Method::Basic)).unwrap();
        let limited = analyze(&set, &AnalysisConfig::with_method(Method::LimitedCarryIn)).unwrap();
        for report in [&basic, &limited] {
            for t in &report.tasks {
                prop_assert!(t.iterations.windows(2).all(|w| w[0] <= w[1]));
                prop_assert_eq!(t.verdict == Verdict::Schedulable, t.response.as_ref().is_some_and(|r| r <= &t.deadline));
                if let (Termination::EpsilonSearch, Some(r)) = (t.termination, &t.response) {
                    prop_assert!((r / &AnalysisConfig::default().epsilon).is_integer());
                }
            }
        }
        for (b, l) in basic.tasks.iter().zip(&limited.tasks) {
            if let Some(rb) = &b.response {
                prop_assert!(l.response.as_ref().is_some_and(|rl| rl <= rb));
            }
        }
    }

    #[test]
    fn adding_a_lower_priority_task_keeps_existing_bounds(seed in any::<u64>(), cores in 1usize..5, fraction in 0.1f64..0.9) {
        let Ok(set) = generate_taskset(&small_params(seed, cores, fraction)) else { return Ok(()) };
        for method in [Method::Basic, Method::LimitedCarryIn] {
            let config = AnalysisConfig::with_method(method);
            let full = analyze(&set, &config).unwrap();
            for len in 1..set.len() {
                let prefix = analyze(&set.prefix(len), &config).unwrap();
                prop_assert_eq!(&prefix.tasks[..], &full.tasks[..len]);
            }
        }
    }

    #[test]
    fn single_core_single_node_interference_is_the_carry_in_sum(specs in single_node_specs(), delta in 0i64..2000) {
        let set = single_node_set(&specs);
        let report = analyze(&set, &AnalysisConfig::default()).unwrap();
        let profiles: Vec<_> = set.tasks().iter().map(|t| timing_profile(t, 1)).collect();
        let n = report.tasks.iter().take_while(|t| t.response.is_some()).count().min(set.len() - 1);
        let contexts: Vec<_> = (0..n)
            .map(|j| WorkloadContext::new(set.task(j), &profiles[j], report.tasks[j].response.clone().unwrap()).unwrap())
            .collect();
        let delta = Time::new(delta, 10);
        let sum: Time = contexts.iter().map(|c| c.window_max(&delta)).sum();
        prop_assert_eq!(interference_basic(&contexts, 1, &delta), sum);
    }

    // The DAG test never accepts a single-node task the sequential test
    // rejects; the verdicts coincide while no higher-priority task carries
    // slack (K = R − C = 0).
    #[test]
    fn single_core_single_node_verdicts_follow_the_sequential_test(specs in single_node_specs()) {
        let set = single_node_set(&specs);
        let dag = analyze(&set, &AnalysisConfig::default()).unwrap();
        let ll = ll_responses(&set);
        for (i, t) in dag.tasks.iter().enumerate() {
            if t.verdict == Verdict::BlockedByHigherPriority || ll[..i].iter().any(Option::is_none) {
                continue;
            }
            let dag_ok = t.verdict == Verdict::Schedulable;
            prop_assert!(!dag_ok || ll[i].is_some());
            let no_slack = dag.tasks[..i].iter().zip(set.tasks()).all(|(h, task)| h.response.as_ref() == Some(task.total_wcet()));
            if no_slack {
                prop_assert_eq!(dag_ok, ll[i].is_some());
            }
        }
    }

    #[test]
    fn simulation_traces_are_valid_and_deterministic(seed in any::<u64>(), cores in 1usize..5, fraction in 0.1f64..1.0) {
        let Ok(set) = generate_taskset(&small_params(seed, cores, fraction)) else { return Ok(()) };
        let horizon = set.tasks().iter().map(|t| t.period().clone()).max().unwrap() * int(2);
        let scenario = Scenario::sporadic(seed, horizon).with_random_costs(seed ^ 1);
        let a = simulate(&set, &scenario).unwrap();
        prop_assert!(validate_trace(&set, &a.trace).is_ok());
        prop_assert_eq!(a, simulate(&set, &scenario).unwrap());
    }

    #[test]
    fn lone_task_with_enough_cores_runs_its_critical_path(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let task = random_dag(&mut rng, 7, 9, 0.3);
        let cores = max_parallelism(&task).max(1);
        let len = critical_path_length(&task);
        let set = TaskSet::new(vec![task.clone()], cores).unwrap();
        let out = simulate(&set, &Scenario::synchronous(task.period() * &int(3))).unwrap();
        for job in &out.jobs {
            prop_assert_eq!(job.response(), Some(len.clone()));
        }
    }

    #[test]
    fn generated_sets_are_valid_and_reproducible(seed in any::<u64>(), cores in 1usize..6, fraction in 0.05f64..0.9) {
        let params = small_params(seed, cores, fraction);
        let Ok(set) = generate_taskset(&params) else { return Ok(()) };
        let text = to_json(&set);
        prop_assert_eq!(&text, &to_json(&generate_taskset(&params).unwrap()));
        let reread = parse_task_set(&text).unwrap();
        prop_assert_eq!(&reread, &set);
        prop_assert_eq!(to_json(&reread), text);
        for t in set.tasks() {
            prop_assert!(&critical_path_length(t) <= t.deadline() && t.deadline() <= t.period());
        }
    }
}

#[test]
fn generated_utilization_stays_within_slack() {
    for seed in 0..100 {
        let params = GenParams { seed, utilization: 0.5 + (seed % 7) as f64 * 0.5, ..GenParams::default() };
        let u = generate_taskset(&params).unwrap().utilization().to_f64();
        assert!(u <= params.utilization + 1e-12, "seed {seed}: {u}");
        assert!(u >= (1.0 - UTILIZATION_SLACK) * params.utilization, "seed {seed}: {u}");
    }
}
