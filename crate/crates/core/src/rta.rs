//! Interference bounds and the fixed-point response-time tests.
//!
//! Tasks are analysed in priority order. Every higher-priority task enters
//! the interference bound through a [`WorkloadContext`] built from its own
//! finalized response time, never from a provisional value of the task
//! under analysis.

use std::fmt;

use serde::Serialize;

use crate::graph::{timing_profile, TimingProfile};
use crate::model::{DagTask, TaskSet};
use crate::time::Time;
use crate::workload::{ll_workload_diff, ll_workload_nc, LLTask, RequestBounds, WorkloadContext};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RtaError {
    #[error("HigherPriorityUnschedulable: task {task} cannot be analysed because higher-priority task {blocking} has no valid response-time bound")]
    HigherPriorityUnschedulable { task: String, blocking: String },
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
}

/// Which interference bound drives the fixed point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Every higher-priority task is assumed to carry in.
    #[default]
    Basic,
    /// At most `m − 1` higher-priority tasks carry in.
    LimitedCarryIn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Basic => "basic",
            Method::LimitedCarryIn => "limited",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisConfig {
    pub method: Method,
    /// Increment below which plain iteration gives up on reaching an exact
    /// fixed point and continues on multiples of epsilon instead.
    pub epsilon: Time,
    pub max_iterations: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { method: Method::Basic, epsilon: Time::new(1, 1_000_000), max_iterations: 100_000 }
    }
}

impl AnalysisConfig {
    pub fn with_method(method: Method) -> Self {
        AnalysisConfig { method, ..AnalysisConfig::default() }
    }

    pub fn check(&self) -> Result<(), RtaError> {
        if !self.epsilon.is_positive() {
            return Err(RtaError::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(RtaError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Schedulable,
    Unschedulable,
    BlockedByHigherPriority,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Schedulable => "schedulable",
            Verdict::Unschedulable => "unschedulable",
            Verdict::BlockedByHigherPriority => "blocked_by_higher_priority",
        })
    }
}

/// How the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Two consecutive iterates were equal.
    ExactRepeat,
    /// Increments fell below epsilon; the bound is the smallest multiple of
    /// epsilon, at or above the last iterate, that bounds its own interference.
    EpsilonSearch,
    /// An iterate exceeded the deadline.
    DeadlineExceeded,
    /// `max_iterations` was reached without convergence.
    IterationLimit,
    /// Not analysed because a higher-priority task failed.
    Blocked,
}

/// Outcome of the fixed-point iteration for one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseTime {
    /// The certified bound when schedulable; otherwise the last iterate.
    pub bound: Time,
    pub verdict: Verdict,
    pub termination: Termination,
    /// `R^{0} = R_isol, R^{1}, …`, non-decreasing.
    pub iterations: Vec<Time>,
}

/// `(1/m)·Σ_j W_j^CI(Δ)` over the higher-priority tasks.
pub fn interference_basic(higher: &[WorkloadContext<'_>], cores: usize, delta: &Time) -> Time {
    let total: Time = higher.iter().map(|ctx| ctx.window_max(delta)).sum();
    total / Time::from(cores)
}

/// `(1/m)·(Σ of the m−1 largest carry-in differences + Σ_j W_j^NC(Δ))`.
pub fn interference_limited(higher: &[WorkloadContext<'_>], cores: usize, delta: &Time) -> Time {
    let mut no_carry_total = Time::ZERO;
    let mut diffs = Vec::with_capacity(higher.len());
    for ctx in higher {
        let with = ctx.window_max(delta);
        let without = ctx.no_carry_in().window_max(delta);
        diffs.push((&with - &without).clamp_non_negative());
        no_carry_total += without;
    }
    (largest_sum(diffs, cores - 1) + no_carry_total) / Time::from(cores)
}

/// Reference interference bound for sequential tasks: the `m − 1` largest
/// carry-in differences scaled by `1/m`, plus the unscaled no-carry-in sum.
pub fn interference_ll(higher: &[LLTask], cores: usize, delta: &Time) -> Time {
    let diffs = higher.iter().map(|t| ll_workload_diff(t, delta)).collect();
    let no_carry_total: Time = higher.iter().map(|t| ll_workload_nc(t, delta)).sum();
    largest_sum(diffs, cores - 1) / Time::from(cores) + no_carry_total
}

fn largest_sum(mut values: Vec<Time>, count: usize) -> Time {
    values.sort_unstable_by(|a, b| b.cmp(a));
    values.into_iter().take(count).sum()
}

/// Interference on a task from `higher` under `method`.
pub fn interference(method: Method, higher: &[WorkloadContext<'_>], cores: usize, delta: &Time) -> Time {
    match method {
        Method::Basic => interference_basic(higher, cores, delta),
        Method::LimitedCarryIn => interference_limited(higher, cores, delta),
    }
}

/// Iterates `R ← I(R) + R_isol` from `R_isol` for one task.
pub fn response_time(
    task: &DagTask,
    profile: &TimingProfile,
    higher: &[WorkloadContext<'_>],
    cores: usize,
    config: &AnalysisConfig,
) -> Result<ResponseTime, RtaError> {
    config.check()?;
    let deadline = task.deadline();
    let step = |r: &Time| interference(config.method, higher, cores, r) + &profile.r_isolated;
    let finish = |bound: Time, verdict, termination, iterations| {
        Ok(ResponseTime { bound, verdict, termination, iterations })
    };

    let mut current = profile.r_isolated.clone();
    let mut iterations = vec![current.clone()];
    if &current > deadline {
        return finish(current, Verdict::Unschedulable, Termination::DeadlineExceeded, iterations);
    }

    for _ in 0..config.max_iterations {
        let next = step(&current);
        iterations.push(next.clone());
        if next == current {
            return finish(next, Verdict::Schedulable, Termination::ExactRepeat, iterations);
        }
        if &next > deadline {
            return finish(next, Verdict::Unschedulable, Termination::DeadlineExceeded, iterations);
        }

        if &next - &current < config.epsilon {
            // Continue on the epsilon grid: the first multiple of epsilon that
            // bounds its own interference. Rounding up keeps every probe at or
            // below that point, so the result does not depend on the path taken.
            let grid = |r: &Time| (r / &config.epsilon).ceil() * &config.epsilon;
            let mut probe = grid(&next);
            loop {
                if &probe > deadline {
                    iterations.push(probe.clone());
                    return finish(probe, Verdict::Unschedulable, Termination::DeadlineExceeded, iterations);
                }
                let image = step(&probe);
                if image <= probe {
                    iterations.push(probe.clone());
                    return finish(probe, Verdict::Schedulable, Termination::EpsilonSearch, iterations);
                }
                iterations.push(probe);
                probe = grid(&image);
            }
        }

        current = next;
    }
    finish(current, Verdict::Unschedulable, Termination::IterationLimit, iterations)
}

/// Per-task analysis results.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskAnalysis {
    pub task: String,
    pub deadline: Time,
    pub r_isolated: Time,
    /// Certified response-time bound; `None` when unschedulable or blocked.
    pub response: Option<Time>,
    pub verdict: Verdict,
    pub termination: Termination,
    pub iterations: Vec<Time>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisReport {
    pub method: Method,
    pub cores: usize,
    pub tasks: Vec<TaskAnalysis>,
    /// True iff every task is schedulable.
    pub schedulable: bool,
}

impl AnalysisReport {
    /// Finalized bounds, `None` for tasks without one.
    pub fn responses(&self) -> Vec<Option<Time>> {
        self.tasks.iter().map(|t| t.response.clone()).collect()
    }
}

/// Runs the configured test over the whole set in priority order.
pub fn analyze(set: &TaskSet, config: &AnalysisConfig) -> Result<AnalysisReport, RtaError> {
    config.check()?;
    let cores = set.cores();
    let profiles: Vec<TimingProfile> = set.tasks().iter().map(|t| timing_profile(t, cores)).collect();
    let mut finalized: Vec<Time> = Vec::with_capacity(set.len());
    let mut tasks = Vec::with_capacity(set.len());
    let mut blocked = false;

    for (i, task) in set.tasks().iter().enumerate() {
        let profile = &profiles[i];
        if blocked {
            tasks.push(TaskAnalysis {
                task: task.id().to_string(),
                deadline: task.deadline().clone(),
                r_isolated: profile.r_isolated.clone(),
                response: None,
                verdict: Verdict::BlockedByHigherPriority,
                termination: Termination::Blocked,
                iterations: Vec::new(),
            });
            continue;
        }
        let higher = contexts(&set.tasks()[..i], &profiles[..i], &finalized);
        let outcome = response_time(task, profile, &higher, cores, config)?;
        let response = match outcome.verdict {
            Verdict::Schedulable => {
                finalized.push(outcome.bound.clone());
                Some(outcome.bound)
            }
            _ => {
                blocked = true;
                None
            }
        };
        tasks.push(TaskAnalysis {
            task: task.id().to_string(),
            deadline: task.deadline().clone(),
            r_isolated: profile.r_isolated.clone(),
            response,
            verdict: outcome.verdict,
            termination: outcome.termination,
            iterations: outcome.iterations,
        });
    }

    let schedulable = tasks.iter().all(|t| t.verdict == Verdict::Schedulable);
    Ok(AnalysisReport { method: config.method, cores, tasks, schedulable })
}

fn contexts<'a>(tasks: &'a [DagTask], profiles: &'a [TimingProfile], responses: &[Time]) -> Vec<WorkloadContext<'a>> {
    tasks
        .iter()
        .zip(profiles)
        .zip(responses)
        .map(|((task, profile), r)| {
            WorkloadContext::new(task, profile, r.clone()).expect("finalized bounds are at least the isolated bound")
        })
        .collect()
}

/// Higher-priority contexts for the task at `index`, given per-task
/// finalized bounds (`None` = no valid bound).
pub fn higher_priority_contexts<'a>(
    set: &'a TaskSet,
    profiles: &'a [TimingProfile],
    responses: &[Option<Time>],
    index: usize,
) -> Result<Vec<WorkloadContext<'a>>, RtaError> {
    let mut finalized = Vec::with_capacity(index);
    for j in 0..index {
        match &responses[j] {
            Some(r) => finalized.push(r.clone()),
            None => {
                return Err(RtaError::HigherPriorityUnschedulable {
                    task: set.task(index).id().to_string(),
                    blocking: set.task(j).id().to_string(),
                })
            }
        }
    }
    Ok(contexts(&set.tasks()[..index], &profiles[..index], &finalized))
}

/// Re-evaluates `I(R) + R_isol ≤ R` for every schedulable task of `report`.
pub fn certificate_holds(set: &TaskSet, report: &AnalysisReport) -> bool {
    let cores = set.cores();
    let profiles: Vec<TimingProfile> = set.tasks().iter().map(|t| timing_profile(t, cores)).collect();
    let responses = report.responses();
    report.tasks.iter().enumerate().all(|(i, analysis)| {
        let Some(r) = &analysis.response else { return true };
        let Ok(higher) = higher_priority_contexts(set, &profiles, &responses, i) else { return false };
        interference(report.method, &higher, cores, r) + &profiles[i].r_isolated <= *r
    })
}
