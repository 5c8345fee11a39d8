//! Workload-request bounds.
//!
//! For a DAG task `τ` with period `T`, per-node functions bound how much of
//! node `j` can have executed `t` time units into a job:
//!
//! * upper: `min(max((t mod T) − e_j, 0), c_j)`, nodes released as early as possible;
//! * lower: `min(max((t mod T) − ℓ_j, 0), c_j)`, nodes released as late as possible.
//!
//! Summing them over the graph gives task-level request functions, with a
//! carry-in variant (the first job is delayed by the slack `K = R − len`)
//! and a no-carry-in variant (synchronous release). A window bound is the
//! largest `upper(Δ + φ) − lower(φ)` over offsets `φ ∈ [0, len]`, searched
//! over a finite candidate set instead of the whole interval.

use crate::graph::TimingProfile;
use crate::model::DagTask;
use crate::time::Time;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorkloadError {
    #[error("UnknownNode: task {task} has no node {node}")]
    UnknownNode { task: String, node: String },
    #[error("InvalidResponse: task {task} response bound {response} is below its isolated bound {isolated}")]
    InvalidResponse { task: String, response: Time, isolated: Time },
}

/// A task together with its finalized response-time bound, as needed to
/// bound the carry-in workload it can impose on lower-priority tasks.
#[derive(Debug, Clone)]
pub struct WorkloadContext<'a> {
    task: &'a DagTask,
    profile: &'a TimingProfile,
    response: Time,
    slack: Time,
}

impl<'a> WorkloadContext<'a> {
    pub fn new(task: &'a DagTask, profile: &'a TimingProfile, response: Time) -> Result<Self, WorkloadError> {
        if response < profile.r_isolated {
            return Err(WorkloadError::InvalidResponse {
                task: task.id().to_string(),
                response,
                isolated: profile.r_isolated.clone(),
            });
        }
        let slack = &response - &profile.critical_path_length;
        Ok(WorkloadContext { task, profile, response, slack })
    }

    pub fn task(&self) -> &'a DagTask {
        self.task
    }

    pub fn profile(&self) -> &'a TimingProfile {
        self.profile
    }

    pub fn response(&self) -> &Time {
        &self.response
    }

    /// `K = R − len`: how long the first node of a job can be kept off
    /// every core.
    pub fn carry_in_slack(&self) -> &Time {
        &self.slack
    }

    /// The same task viewed without carry-in.
    pub fn no_carry_in(&self) -> NoCarryIn<'a> {
        NoCarryIn { task: self.task, profile: self.profile }
    }
}

/// A task whose first job in the window is released synchronously with it.
#[derive(Debug, Clone, Copy)]
pub struct NoCarryIn<'a> {
    pub task: &'a DagTask,
    pub profile: &'a TimingProfile,
}

impl<'a> NoCarryIn<'a> {
    pub fn new(task: &'a DagTask, profile: &'a TimingProfile) -> Self {
        NoCarryIn { task, profile }
    }
}

/// Sorted, duplicate-free offsets inside `[0, len]`, always containing both
/// endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetCandidates {
    offsets: Vec<Time>,
}

impl OffsetCandidates {
    fn collect(mut offsets: Vec<Time>, len: &Time) -> Self {
        offsets.push(Time::ZERO);
        offsets.push(len.clone());
        offsets.retain(|phi| !phi.is_negative() && phi <= len);
        offsets.sort_unstable();
        offsets.dedup();
        OffsetCandidates { offsets }
    }

    pub fn as_slice(&self) -> &[Time] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn contains(&self, phi: &Time) -> bool {
        self.offsets.binary_search(phi).is_ok()
    }
}

/// Upper and lower workload-request functions of one task, plus the
/// offsets at which their window difference can peak.
pub trait RequestBounds {
    fn task(&self) -> &DagTask;
    fn profile(&self) -> &TimingProfile;
    /// Upper bound on the work the task can have requested by time `t`.
    fn upper(&self, t: &Time) -> Time;
    /// Lower bound on the work the task must have requested by time `t`.
    fn lower(&self, t: &Time) -> Time;
    fn candidate_offsets(&self, delta: &Time) -> OffsetCandidates;

    /// `max_φ upper(Δ + φ) − lower(φ)` over the candidate offsets.
    fn window_max(&self, delta: &Time) -> Time {
        self.candidate_offsets(delta)
            .as_slice()
            .iter()
            .map(|phi| self.upper(&(delta + phi)) - self.lower(phi))
            .max()
            .expect("candidate set contains the window borders")
    }
}

// Σ_j min(max(s − start_j, 0), c_j) for an in-period time `s`.
fn node_sum(task: &DagTask, starts: &[Time], s: &Time) -> Time {
    let mut total = Time::ZERO;
    for (start, node) in starts.iter().zip(task.nodes()) {
        if s <= start {
            continue;
        }
        let elapsed = s - start;
        total += if elapsed >= node.c_max { &node.c_max } else { &elapsed };
    }
    total
}

fn periodic_sum(task: &DagTask, starts: &[Time], t: &Time) -> Time {
    let period = task.period();
    let jobs = t.div_floor(period);
    let within = t - &(period * &jobs);
    jobs * task.total_wcet() + node_sum(task, starts, &within)
}

// Offsets where `upper(Δ + φ) − lower(φ)` can peak: latest starts (the
// lower bound starts growing), completions under earliest release (the
// upper bound stops growing), and the jump of the carry-in bound at
// `t = T − K`. `slack` is `K`, zero without carry-in.
fn candidate_set(task: &DagTask, profile: &TimingProfile, slack: &Time, delta: &Time) -> OffsetCandidates {
    let len = &profile.critical_path_length;
    let period = task.period();
    let mut offsets: Vec<Time> = profile.latest.as_slice().to_vec();
    let finishes: Vec<Time> = profile
        .earliest
        .as_slice()
        .iter()
        .zip(task.nodes())
        .map(|(start, node)| start + &node.c_max)
        .collect();
    offsets.push(&(period - slack) - delta);
    // First job: completions before the carry-in jump.
    offsets.extend(finishes.iter().map(|f| f - delta));
    // Later jobs are released at kT − K, k ≥ 1.
    let shifted = delta + slack;
    let mut k = ((&shifted - len) / period).ceil().max(Time::ONE);
    let k_max = (&(&shifted + len) / period).floor();
    while k <= k_max {
        let release = &(&k * period) - slack;
        offsets.extend(finishes.iter().map(|f| &(&release + f) - delta));
        k += Time::ONE;
    }
    OffsetCandidates::collect(offsets, len)
}

impl RequestBounds for WorkloadContext<'_> {
    fn task(&self) -> &DagTask {
        self.task
    }

    fn profile(&self) -> &TimingProfile {
        self.profile
    }

    fn upper(&self, t: &Time) -> Time {
        carry_in_sum(self, self.profile.earliest.as_slice(), t)
    }

    fn lower(&self, t: &Time) -> Time {
        carry_in_sum(self, self.profile.latest.as_slice(), t)
    }

    fn candidate_offsets(&self, delta: &Time) -> OffsetCandidates {
        candidate_set(self.task, self.profile, &self.slack, delta)
    }
}

fn carry_in_sum(ctx: &WorkloadContext<'_>, starts: &[Time], t: &Time) -> Time {
    let period = ctx.task.period();
    if t < &(period - &ctx.slack) {
        node_sum(ctx.task, starts, &t.rem_euclid(period))
    } else {
        periodic_sum(ctx.task, starts, &(t + &ctx.slack))
    }
}

impl RequestBounds for NoCarryIn<'_> {
    fn task(&self) -> &DagTask {
        self.task
    }

    fn profile(&self) -> &TimingProfile {
        self.profile
    }

    fn upper(&self, t: &Time) -> Time {
        periodic_sum(self.task, self.profile.earliest.as_slice(), t)
    }

    fn lower(&self, t: &Time) -> Time {
        periodic_sum(self.task, self.profile.latest.as_slice(), t)
    }

    fn candidate_offsets(&self, delta: &Time) -> OffsetCandidates {
        candidate_set(self.task, self.profile, &Time::ZERO, delta)
    }
}

fn node_bound(task: &DagTask, starts: &[Time], node: &str, t: &Time) -> Result<Time, WorkloadError> {
    let index = task.index_of(node).ok_or_else(|| WorkloadError::UnknownNode {
        task: task.id().to_string(),
        node: node.to_string(),
    })?;
    let s = t.rem_euclid(task.period());
    let elapsed = (s - &starts[index]).clamp_non_negative();
    Ok(elapsed.min(task.node(index).c_max.clone()))
}

/// Per-node upper request bound, nodes released at their earliest time.
pub fn node_workload_upper(ctx: &WorkloadContext<'_>, node: &str, t: &Time) -> Result<Time, WorkloadError> {
    node_bound(ctx.task, ctx.profile.earliest.as_slice(), node, t)
}

/// Per-node lower request bound, nodes released at their latest time.
pub fn node_workload_lower(ctx: &WorkloadContext<'_>, node: &str, t: &Time) -> Result<Time, WorkloadError> {
    node_bound(ctx.task, ctx.profile.latest.as_slice(), node, t)
}

pub fn task_workload_upper_ci(ctx: &WorkloadContext<'_>, t: &Time) -> Time {
    ctx.upper(t)
}

pub fn task_workload_lower_ci(ctx: &WorkloadContext<'_>, t: &Time) -> Time {
    ctx.lower(t)
}

pub fn task_workload_upper_nc(task: &DagTask, profile: &TimingProfile, t: &Time) -> Time {
    NoCarryIn::new(task, profile).upper(t)
}

pub fn task_workload_lower_nc(task: &DagTask, profile: &TimingProfile, t: &Time) -> Time {
    NoCarryIn::new(task, profile).lower(t)
}

pub fn candidate_offsets(ctx: &WorkloadContext<'_>, delta: &Time) -> OffsetCandidates {
    ctx.candidate_offsets(delta)
}

/// Largest workload a task with carry-in can request in a window of
/// length `delta`.
pub fn workload_carry_in(ctx: &WorkloadContext<'_>, delta: &Time) -> Time {
    ctx.window_max(delta)
}

/// Largest workload a task without carry-in can request in a window of
/// length `delta`.
pub fn workload_no_carry_in(task: &DagTask, profile: &TimingProfile, delta: &Time) -> Time {
    NoCarryIn::new(task, profile).window_max(delta)
}

/// Extra workload due to carry-in, never negative.
pub fn workload_diff_dag(ctx: &WorkloadContext<'_>, delta: &Time) -> Time {
    (workload_carry_in(ctx, delta) - workload_no_carry_in(ctx.task, ctx.profile, delta)).clamp_non_negative()
}

/// Brute-force window maximum over `φ ∈ {0, step, 2·step, …} ∪ {len}`.
/// Slow; meant for cross-checking [`RequestBounds::window_max`].
pub fn oracle_window_max<B: RequestBounds + ?Sized>(bounds: &B, delta: &Time, step: &Time) -> Time {
    assert!(step.is_positive(), "grid step must be positive");
    let len = &bounds.profile().critical_path_length;
    let eval = |phi: &Time| bounds.upper(&(delta + phi)) - bounds.lower(phi);
    let mut best = eval(len);
    let mut phi = Time::ZERO;
    while &phi < len {
        let value = eval(&phi);
        if value > best {
            best = value;
        }
        phi += step;
    }
    best
}

/// A classic sequential sporadic task, used as a reference for single-node
/// DAG tasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LLTask {
    pub wcet: Time,
    pub deadline: Time,
    pub period: Time,
    pub response: Time,
}

impl LLTask {
    pub fn new(wcet: Time, deadline: Time, period: Time, response: Time) -> Self {
        debug_assert!(!wcet.is_negative() && wcet <= deadline && deadline <= period);
        LLTask { wcet, deadline, period, response }
    }
}

/// `⌊Δ/T⌋·C + min(Δ mod T, C)`.
pub fn ll_workload_nc(task: &LLTask, delta: &Time) -> Time {
    let jobs = delta.div_floor(&task.period);
    let rest = delta.rem_euclid(&task.period);
    jobs * &task.wcet + rest.min(task.wcet.clone())
}

/// Carry-in bound with the body counted from `max(Δ − C, 0)` and the
/// carry-out job limited to `[0, C]`.
pub fn ll_workload_ci(task: &LLTask, delta: &Time) -> Time {
    let body = (delta - &task.wcet).clamp_non_negative();
    let jobs = body.div_floor(&task.period);
    let tail = body.rem_euclid(&task.period) - (&task.period - &task.response);
    jobs * &task.wcet + &task.wcet + tail.clamp_non_negative().min(task.wcet.clone())
}

pub fn ll_workload_diff(task: &LLTask, delta: &Time) -> Time {
    (ll_workload_ci(task, delta) - ll_workload_nc(task, delta)).clamp_non_negative()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::timing_profile;
    use crate::model::{validate, Node, RawTask};

    fn int(v: i64) -> Time {
        Time::from_integer(v)
    }

    fn t(s: &str) -> Time {
        s.parse().unwrap()
    }

    fn single(c: i64, d: i64, p: i64) -> DagTask {
        validate(&RawTask {
            id: "s".into(),
            nodes: vec![Node::fixed("v", int(c))],
            edges: vec![],
            deadline: int(d),
            period: int(p),
        })
        .unwrap()
    }

    fn diamond() -> DagTask {
        validate(&RawTask {
            id: "d".into(),
            nodes: [("v1", 2), ("v2", 3), ("v3", 1), ("v4", 2)]
                .iter()
                .map(|(n, c)| Node::fixed(*n, int(*c)))
                .collect(),
            edges: [("v1", "v2"), ("v1", "v3"), ("v2", "v4"), ("v3", "v4")]
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            deadline: int(15),
            period: int(20),
        })
        .unwrap()
    }

    #[test]
    fn node_bounds_examples() {
        let d = diamond();
        let p = timing_profile(&d, 2);
        let ctx = WorkloadContext::new(&d, &p, t("7.5")).unwrap();
        assert_eq!(node_workload_upper(&ctx, "v4", &int(6)).unwrap(), int(1));
        assert_eq!(node_workload_upper(&ctx, "v1", &int(0)).unwrap(), int(0));
        assert_eq!(node_workload_upper(&ctx, "v4", &int(27)).unwrap(), int(2));
        assert_eq!(node_workload_lower(&ctx, "v4", &int(5)).unwrap(), int(0));
        assert_eq!(node_workload_lower(&ctx, "v3", &int(6)).unwrap(), int(1));
        assert!(matches!(node_workload_upper(&ctx, "nope", &int(1)), Err(WorkloadError::UnknownNode { .. })));
        for step in 0..60 {
            let at = Time::new(step, 2);
            for n in ["v1", "v2", "v3", "v4"] {
                assert!(node_workload_lower(&ctx, n, &at).unwrap() <= node_workload_upper(&ctx, n, &at).unwrap());
            }
        }
    }

    #[test]
    fn context_rejects_response_below_isolation() {
        let d = diamond();
        let p = timing_profile(&d, 2);
        assert!(matches!(WorkloadContext::new(&d, &p, int(7)), Err(WorkloadError::InvalidResponse { .. })));
        assert_eq!(WorkloadContext::new(&d, &p, t("7.5")).unwrap().carry_in_slack(), &t("0.5"));
    }

    #[test]
    fn carry_in_request_examples() {
        let s = single(2, 5, 5);
        let sp = timing_profile(&s, 2);
        let ctx = WorkloadContext::new(&s, &sp, int(2)).unwrap();
        assert_eq!(task_workload_upper_ci(&ctx, &t("7.5")), int(4));
        assert_eq!(task_workload_upper_ci(&ctx, &Time::ZERO), Time::ZERO);
        for step in 0..40 {
            let at = Time::new(step, 4);
            assert_eq!(task_workload_lower_ci(&ctx, &at), task_workload_upper_ci(&ctx, &at));
        }

        let d = diamond();
        let dp = timing_profile(&d, 2);
        let ctx = WorkloadContext::new(&d, &dp, t("7.5")).unwrap();
        assert_eq!(task_workload_upper_ci(&ctx, &int(1)), int(1));
        assert_eq!(task_workload_lower_ci(&ctx, &int(3)), int(3));
        assert_eq!(task_workload_lower_ci(&ctx, &Time::ZERO), Time::ZERO);
    }

    #[test]
    fn no_carry_in_request_examples() {
        let s = single(2, 5, 5);
        let sp = timing_profile(&s, 1);
        assert_eq!(task_workload_upper_nc(&s, &sp, &int(12)), int(6));
        assert_eq!(task_workload_upper_nc(&s, &sp, &Time::ZERO), Time::ZERO);
        let d = diamond();
        let dp = timing_profile(&d, 2);
        assert_eq!(task_workload_upper_nc(&d, &dp, &int(20)), int(8));
        assert_eq!(task_workload_lower_nc(&d, &dp, &int(5)), int(6));
        assert_eq!(task_workload_lower_nc(&d, &dp, &Time::ZERO), Time::ZERO);
        for step in 0..40 {
            let at = Time::new(step, 3);
            assert_eq!(task_workload_lower_nc(&s, &sp, &at), task_workload_upper_nc(&s, &sp, &at));
        }
    }

    #[test]
    fn candidate_offsets_examples() {
        let s = single(2, 5, 5);
        let sp = timing_profile(&s, 1);
        let ctx = WorkloadContext::new(&s, &sp, int(2)).unwrap();
        assert_eq!(candidate_offsets(&ctx, &int(5)).as_slice(), &[int(0), int(2)]);
        assert_eq!(candidate_offsets(&ctx, &t("7.5")).as_slice(), &[int(0), int(2)]);
    }

    #[test]
    fn window_bounds_examples() {
        let s = single(2, 5, 5);
        let sp = timing_profile(&s, 1);
        let ctx = WorkloadContext::new(&s, &sp, int(2)).unwrap();
        assert_eq!(workload_carry_in(&ctx, &int(5)), int(2));
        assert_eq!(workload_carry_in(&ctx, &t("7.5")), int(4));
        assert_eq!(workload_no_carry_in(&s, &sp, &int(12)), int(6));
        assert_eq!(workload_diff_dag(&ctx, &t("7.5")), Time::ZERO);
        assert_eq!(workload_diff_dag(&ctx, &int(5)), Time::ZERO);
        assert!(workload_carry_in(&ctx, &Time::ZERO) >= Time::ZERO);

        let step = Time::new(2, 10_000);
        assert_eq!(oracle_window_max(&ctx, &int(5), &t("0.001")), int(2));
        assert_eq!(oracle_window_max(&ctx, &t("7.5"), &step), int(4));

        let d = diamond();
        let dp = timing_profile(&d, 2);
        assert!(workload_no_carry_in(&d, &dp, &int(20)) >= int(8));
    }

    #[test]
    fn ll_examples() {
        let nc = LLTask::new(int(2), int(5), int(5), int(2));
        assert_eq!(ll_workload_nc(&nc, &int(12)), int(6));
        assert_eq!(ll_workload_nc(&nc, &Time::ZERO), Time::ZERO);
        assert_eq!(ll_workload_nc(&nc, &int(5)), int(2));

        let ci = LLTask::new(int(2), int(5), int(5), int(3));
        assert_eq!(ll_workload_ci(&ci, &int(9)), int(4));
        assert_eq!(ll_workload_ci(&ci, &Time::ZERO), int(2));
        assert_eq!(ll_workload_ci(&ci, &int(12)), int(6));

        assert_eq!(ll_workload_diff(&ci, &int(12)), Time::ZERO);
        assert_eq!(ll_workload_diff(&ci, &Time::ZERO), int(2));
        assert_eq!(ll_workload_diff(&ci, &int(9)), Time::ZERO);
    }
}
