//! Discrete-event simulation of global preemptive fixed-priority
//! scheduling of DAG jobs.
//!
//! At every event the `m` highest-priority ready nodes run. Priority is
//! ordered by task index, then job index, then topological node index.
//! Preemption and migration are free. A node that keeps running across an
//! event keeps its core; newly dispatched nodes take the lowest free core.
//! Zero-cost nodes complete the moment they become ready without occupying
//! a core.
//!
//! A simulation can expose a deadline miss but never prove schedulability:
//! synchronous release is not necessarily the worst case under global
//! scheduling.

use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::TaskSet;
use crate::rta::{analyze, AnalysisConfig, AnalysisReport, RtaError, Verdict};
use crate::time::Time;

/// Resolution of sampled release gaps and execution times.
const SAMPLE_STEPS: i64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("HorizonTooShort: horizon {horizon} is shorter than the largest period {period}")]
    HorizonTooShort { horizon: Time, period: Time },
    #[error("InvalidScenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReleasePattern {
    /// Every task releases at 0, T, 2T, …
    Synchronous,
    /// First release at 0, then gaps drawn uniformly from `[T, jitter·T]`.
    Sporadic { seed: u64, jitter: Time },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecutionPattern {
    WorstCase,
    /// Node costs drawn uniformly from `[c_min, c_max]`.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub release: ReleasePattern,
    pub execution: ExecutionPattern,
    pub horizon: Time,
}

impl Scenario {
    pub fn synchronous(horizon: Time) -> Scenario {
        Scenario { release: ReleasePattern::Synchronous, execution: ExecutionPattern::WorstCase, horizon }
    }

    pub fn sporadic(seed: u64, horizon: Time) -> Scenario {
        Scenario {
            release: ReleasePattern::Sporadic { seed, jitter: Time::new(3, 2) },
            execution: ExecutionPattern::WorstCase,
            horizon,
        }
    }

    pub fn with_random_costs(mut self, seed: u64) -> Scenario {
        self.execution = ExecutionPattern::Random { seed };
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Release,
    Start,
    Preempt,
    Resume,
    Complete,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Release => "release",
            EventKind::Start => "start",
            EventKind::Preempt => "preempt",
            EventKind::Resume => "resume",
            EventKind::Complete => "complete",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One scheduling event. `node` is `None` for releases; `core` is `None`
/// for releases and for zero-cost completions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: Time,
    pub kind: EventKind,
    pub task: usize,
    pub job: usize,
    pub node: Option<usize>,
    pub core: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobRecord {
    pub task: usize,
    pub index: usize,
    pub release: Time,
    pub absolute_deadline: Time,
    pub completion: Option<Time>,
}

impl JobRecord {
    pub fn response(&self) -> Option<Time> {
        self.completion.as_ref().map(|c| c - &self.release)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadlineMiss {
    pub task: usize,
    pub job: usize,
    /// `None` when the job was still running at the horizon.
    pub completion: Option<Time>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOutcome {
    pub horizon: Time,
    pub jobs: Vec<JobRecord>,
    pub misses: Vec<DeadlineMiss>,
    /// Largest completed-job response per task.
    pub max_response: Vec<Option<Time>>,
    pub trace: Vec<TraceEvent>,
}

impl SimOutcome {
    /// Per-task count of deadline misses.
    pub fn miss_counts(&self, tasks: usize) -> Vec<usize> {
        let mut counts = vec![0; tasks];
        for miss in &self.misses {
            counts[miss.task] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeState {
    Waiting,
    Ready,
    Running(usize),
    Done,
}

struct Job {
    task: usize,
    index: usize,
    record: usize,
    remaining: Vec<Time>,
    started: Vec<bool>,
    pending: Vec<usize>,
    state: Vec<NodeState>,
    unfinished: usize,
}

struct Sim<'a> {
    set: &'a TaskSet,
    now: Time,
    jobs: Vec<Job>,
    records: Vec<JobRecord>,
    trace: Vec<TraceEvent>,
    cores: Vec<Option<(usize, usize)>>,
}

pub fn simulate(set: &TaskSet, scenario: &Scenario) -> Result<SimOutcome, SimError> {
    let longest = set.tasks().iter().map(|t| t.period()).max().expect("task sets are non-empty");
    if &scenario.horizon < longest {
        return Err(SimError::HorizonTooShort { horizon: scenario.horizon.clone(), period: longest.clone() });
    }
    if let ReleasePattern::Sporadic { jitter, .. } = &scenario.release {
        if jitter < &Time::ONE {
            return Err(SimError::InvalidScenario(format!("jitter factor must be at least 1, got {jitter}")));
        }
    }

    let mut releases: Vec<(Time, usize)> = Vec::new();
    for i in 0..set.len() {
        releases.extend(release_times(set, i, scenario).into_iter().map(|t| (t, i)));
    }
    releases.sort();
    let mut cost_rngs: Vec<Option<ChaCha8Rng>> = (0..set.len())
        .map(|i| match scenario.execution {
            ExecutionPattern::WorstCase => None,
            ExecutionPattern::Random { seed } => Some(stream(seed, i, 1)),
        })
        .collect();
    let mut next_job = vec![0usize; set.len()];

    let mut sim = Sim {
        set,
        now: Time::ZERO,
        jobs: Vec::new(),
        records: Vec::new(),
        trace: Vec::new(),
        cores: vec![None; set.cores()],
    };
    let mut pending = releases.into_iter().peekable();

    loop {
        while let Some((_, task)) = pending.next_if(|(t, _)| t <= &sim.now) {
            let index = next_job[task];
            next_job[task] += 1;
            let costs = sample_costs(set, task, cost_rngs[task].as_mut());
            sim.release(task, index, costs);
        }
        sim.dispatch();

        let finish = sim.earliest_finish();
        let next = match (pending.peek().map(|(t, _)| t.clone()), finish) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => break,
        };
        if next > scenario.horizon {
            break;
        }
        sim.advance(next);
    }

    Ok(sim.finish(&scenario.horizon))
}

fn stream(seed: u64, task: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((task as u64) << 1) | purpose);
    rng
}

fn release_times(set: &TaskSet, task: usize, scenario: &Scenario) -> Vec<Time> {
    let period = set.task(task).period();
    let mut times = Vec::new();
    let mut t = Time::ZERO;
    match &scenario.release {
        ReleasePattern::Synchronous => {
            while t < scenario.horizon {
                times.push(t.clone());
                t += period.clone();
            }
        }
        ReleasePattern::Sporadic { seed, jitter } => {
            let mut rng = stream(*seed, task, 0);
            let spread = period * &(jitter - &Time::ONE);
            while t < scenario.horizon {
                times.push(t.clone());
                let u = Time::new(rng.gen_range(0..=SAMPLE_STEPS), SAMPLE_STEPS);
                t = &(&t + period) + &(&spread * &u);
            }
        }
    }
    times
}

fn sample_costs(set: &TaskSet, task: usize, rng: Option<&mut ChaCha8Rng>) -> Vec<Time> {
    let nodes = set.task(task).nodes();
    match rng {
        None => nodes.iter().map(|n| n.c_max.clone()).collect(),
        Some(rng) => nodes
            .iter()
            .map(|n| {
                let u = Time::new(rng.gen_range(0..=SAMPLE_STEPS), SAMPLE_STEPS);
                &n.c_min + &(&(&n.c_max - &n.c_min) * &u)
            })
            .collect(),
    }
}

impl Sim<'_> {
    fn event(&mut self, kind: EventKind, task: usize, job: usize, node: Option<usize>, core: Option<usize>) {
        self.trace.push(TraceEvent { time: self.now.clone(), kind, task, job, node, core });
    }

    fn release(&mut self, task: usize, index: usize, remaining: Vec<Time>) {
        let dag = self.set.task(task);
        let n = dag.node_count();
        self.records.push(JobRecord {
            task,
            index,
            release: self.now.clone(),
            absolute_deadline: &self.now + dag.deadline(),
            completion: None,
        });
        self.event(EventKind::Release, task, index, None, None);
        let pending: Vec<usize> = (0..n).map(|v| dag.predecessors(v).len()).collect();
        self.jobs.push(Job {
            task,
            index,
            record: self.records.len() - 1,
            remaining,
            started: vec![false; n],
            pending,
            state: vec![NodeState::Waiting; n],
            unfinished: n,
        });
        let slot = self.jobs.len() - 1;
        self.make_ready(slot, dag.entry());
        self.retire();
    }

    // Marks `node` ready and instantly completes zero-cost nodes, cascading
    // through successors. Finished jobs are removed by the caller.
    fn make_ready(&mut self, slot: usize, node: usize) {
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            if self.jobs[slot].remaining[v].is_positive() {
                self.jobs[slot].state[v] = NodeState::Ready;
                continue;
            }
            let (task, index) = (self.jobs[slot].task, self.jobs[slot].index);
            self.event(EventKind::Complete, task, index, Some(v), None);
            stack.extend(self.complete(slot, v));
        }
    }

    // Records completion of `v` and returns successors that became ready.
    fn complete(&mut self, slot: usize, v: usize) -> Vec<usize> {
        let dag = self.set.task(self.jobs[slot].task);
        let job = &mut self.jobs[slot];
        job.state[v] = NodeState::Done;
        job.unfinished -= 1;
        if job.unfinished == 0 {
            self.records[job.record].completion = Some(self.now.clone());
        }
        let mut ready = Vec::new();
        for &s in dag.successors(v) {
            job.pending[s] -= 1;
            if job.pending[s] == 0 {
                ready.push(s);
            }
        }
        ready
    }

    fn dispatch(&mut self) {
        let mut candidates: Vec<(usize, usize, usize, usize)> = Vec::new();
        for (slot, job) in self.jobs.iter().enumerate() {
            for (v, state) in job.state.iter().enumerate() {
                if matches!(state, NodeState::Ready | NodeState::Running(_)) {
                    candidates.push((job.task, job.index, v, slot));
                }
            }
        }
        candidates.sort_unstable();
        let chosen = candidates.len().min(self.cores.len());

        for &(task, index, v, slot) in &candidates[chosen..] {
            if let NodeState::Running(core) = self.jobs[slot].state[v] {
                self.jobs[slot].state[v] = NodeState::Ready;
                self.cores[core] = None;
                self.event(EventKind::Preempt, task, index, Some(v), Some(core));
            }
        }
        for &(task, index, v, slot) in &candidates[..chosen] {
            if self.jobs[slot].state[v] != NodeState::Ready {
                continue;
            }
            let core = self.cores.iter().position(Option::is_none).expect("a core is free");
            self.cores[core] = Some((slot, v));
            let job = &mut self.jobs[slot];
            job.state[v] = NodeState::Running(core);
            let kind = if job.started[v] { EventKind::Resume } else { EventKind::Start };
            job.started[v] = true;
            self.event(kind, task, index, Some(v), Some(core));
        }
    }

    fn earliest_finish(&self) -> Option<Time> {
        self.cores
            .iter()
            .flatten()
            .map(|&(slot, v)| &self.now + &self.jobs[slot].remaining[v])
            .min()
    }

    fn advance(&mut self, to: Time) {
        let elapsed = &to - &self.now;
        self.now = to;
        let mut finished = Vec::new();
        for core in 0..self.cores.len() {
            let Some((slot, v)) = self.cores[core] else { continue };
            let remaining = &mut self.jobs[slot].remaining[v];
            *remaining = &*remaining - &elapsed;
            if remaining.is_zero() {
                finished.push((slot, v, core));
            }
        }
        for (slot, v, core) in finished {
            self.cores[core] = None;
            let (task, index) = (self.jobs[slot].task, self.jobs[slot].index);
            self.event(EventKind::Complete, task, index, Some(v), Some(core));
            for s in self.complete(slot, v) {
                self.make_ready(slot, s);
            }
        }
        self.retire();
    }

    // Drops finished jobs, keeping core assignments pointing at the right slots.
    fn retire(&mut self) {
        if self.jobs.iter().all(|j| j.unfinished > 0) {
            return;
        }
        let mut remap = vec![usize::MAX; self.jobs.len()];
        let mut kept = 0;
        for (slot, job) in self.jobs.iter().enumerate() {
            if job.unfinished > 0 {
                remap[slot] = kept;
                kept += 1;
            }
        }
        self.jobs.retain(|j| j.unfinished > 0);
        for (slot, _) in self.cores.iter_mut().flatten() {
            *slot = remap[*slot];
        }
    }

    fn finish(self, horizon: &Time) -> SimOutcome {
        let mut max_response: Vec<Option<Time>> = vec![None; self.set.len()];
        let mut misses = Vec::new();
        for record in &self.records {
            match &record.completion {
                Some(done) => {
                    let response = done - &record.release;
                    let best = &mut max_response[record.task];
                    if best.as_ref().is_none_or(|b| &response > b) {
                        *best = Some(response);
                    }
                    if done > &record.absolute_deadline {
                        misses.push(DeadlineMiss { task: record.task, job: record.index, completion: Some(done.clone()) });
                    }
                }
                None if &record.absolute_deadline <= horizon => {
                    misses.push(DeadlineMiss { task: record.task, job: record.index, completion: None });
                }
                None => {}
            }
        }
        SimOutcome { horizon: horizon.clone(), jobs: self.records, misses, max_response, trace: self.trace }
    }
}

/// Writes the trace as `time,event,task,node,core` lines with a header.
/// Times are exact (`p` or `p/q`); absent fields are left empty.
pub fn write_trace<W: Write>(set: &TaskSet, trace: &[TraceEvent], out: &mut W) -> io::Result<()> {
    writeln!(out, "time,event,task,node,core")?;
    for e in trace {
        let dag = set.task(e.task);
        let node = e.node.map(|v| dag.node(v).id.as_str()).unwrap_or("");
        let core = e.core.map(|c| c.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", e.time, e.kind, dag.id(), node, core)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceViolation {
    #[error("at {time}: core {core} is used twice")]
    CoreConflict { time: Time, core: usize },
    #[error("at {time}: node {node} of task {task} job {job} runs on two cores")]
    NodeOnTwoCores { time: Time, task: usize, job: usize, node: usize },
    #[error("at {time}: node {node} of task {task} job {job} starts before its predecessors complete")]
    Precedence { time: Time, task: usize, job: usize, node: usize },
    #[error("at {time}: more than {cores} nodes execute")]
    Parallelism { time: Time, cores: usize },
    #[error("at {time}: a ready node of task {waiting} waits while {detail}")]
    Priority { time: Time, waiting: usize, detail: String },
    #[error("at {time}: inconsistent event for task {task} job {job}: {detail}")]
    Inconsistent { time: Time, task: usize, job: usize, detail: String },
}

/// Replays `trace` and checks precedence, at most `m` nodes running, at
/// most one core per node, and work-conserving priority compliance after
/// every batch of simultaneous events.
pub fn validate_trace(set: &TaskSet, trace: &[TraceEvent]) -> Result<(), TraceViolation> {
    use std::collections::{BTreeMap, BTreeSet};

    #[derive(Default)]
    struct JobView {
        done: BTreeSet<usize>,
        running: BTreeMap<usize, usize>,
    }

    let m = set.cores();
    let mut jobs: BTreeMap<(usize, usize), JobView> = BTreeMap::new();
    let mut cores: Vec<Option<(usize, usize, usize)>> = vec![None; m];
    let mut i = 0;
    while i < trace.len() {
        let time = trace[i].time.clone();
        while i < trace.len() && trace[i].time == time {
            let e = &trace[i];
            i += 1;
            let key = (e.task, e.job);
            let inconsistent = |detail: &str| TraceViolation::Inconsistent {
                time: time.clone(),
                task: e.task,
                job: e.job,
                detail: detail.to_string(),
            };
            if e.kind == EventKind::Release {
                if jobs.insert(key, JobView::default()).is_some() {
                    return Err(inconsistent("released twice"));
                }
                continue;
            }
            let v = e.node.ok_or_else(|| inconsistent("node event without node"))?;
            let dag = set.task(e.task);
            let job = jobs.get_mut(&key).ok_or_else(|| inconsistent("event before release"))?;
            match e.kind {
                EventKind::Start | EventKind::Resume => {
                    let core = e.core.ok_or_else(|| inconsistent("dispatch without core"))?;
                    if core >= m || cores[core].is_some() {
                        return Err(TraceViolation::CoreConflict { time, core });
                    }
                    if job.running.contains_key(&v) || job.done.contains(&v) {
                        return Err(TraceViolation::NodeOnTwoCores { time, task: e.task, job: e.job, node: v });
                    }
                    if dag.predecessors(v).iter().any(|p| !job.done.contains(p)) {
                        return Err(TraceViolation::Precedence { time, task: e.task, job: e.job, node: v });
                    }
                    job.running.insert(v, core);
                    cores[core] = Some((e.task, e.job, v));
                }
                EventKind::Preempt => {
                    let core = job.running.remove(&v).ok_or_else(|| inconsistent("preempting an idle node"))?;
                    cores[core] = None;
                }
                EventKind::Complete => {
                    if let Some(core) = job.running.remove(&v) {
                        cores[core] = None;
                    } else if e.core.is_some() {
                        return Err(inconsistent("completing a node that was not running"));
                    }
                    if dag.predecessors(v).iter().any(|p| !job.done.contains(p)) {
                        return Err(TraceViolation::Precedence { time, task: e.task, job: e.job, node: v });
                    }
                    job.done.insert(v);
                }
                EventKind::Release => unreachable!(),
            }
        }
        jobs.retain(|&(task, _), job| job.done.len() < set.task(task).node_count());

        let busy: Vec<(usize, usize, usize)> = cores.iter().flatten().copied().collect();
        if busy.len() > m {
            return Err(TraceViolation::Parallelism { time, cores: m });
        }
        let lowest_running = busy.iter().map(|&(task, job, _)| (task, job)).max();
        for (&(task, job_index), job) in &jobs {
            let dag = set.task(task);
            let waiting = (0..dag.node_count()).any(|v| {
                !job.done.contains(&v)
                    && !job.running.contains_key(&v)
                    && dag.predecessors(v).iter().all(|p| job.done.contains(p))
            });
            if !waiting {
                continue;
            }
            if busy.len() < m {
                return Err(TraceViolation::Priority { time, waiting: task, detail: "a core is idle".into() });
            }
            if let Some((low_task, _)) = lowest_running {
                if low_task > task {
                    let detail = format!("task {low_task} runs (job {job_index} waiting)");
                    return Err(TraceViolation::Priority { time, waiting: task, detail });
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CounterexampleKind {
    /// A task deemed schedulable missed a deadline.
    Miss { completion: Option<Time> },
    /// A job of a schedulable task ran (or was still running) longer than
    /// the analytic bound.
    ResponseAboveBound { observed: Time, bound: Time },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub scenario: usize,
    pub task: usize,
    pub job: usize,
    pub kind: CounterexampleKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyReport {
    pub analysis: AnalysisReport,
    pub outcomes: Vec<SimOutcome>,
    pub counterexamples: Vec<Counterexample>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error(transparent)]
    Analysis(#[from] RtaError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

/// Runs the analysis and every scenario, and flags any observation that
/// contradicts a schedulable verdict.
pub fn check_against_analysis(
    set: &TaskSet,
    config: &AnalysisConfig,
    scenarios: &[Scenario],
) -> Result<ConsistencyReport, CheckError> {
    let analysis = analyze(set, config)?;
    let mut outcomes = Vec::with_capacity(scenarios.len());
    let mut counterexamples = Vec::new();
    for (k, scenario) in scenarios.iter().enumerate() {
        let outcome = simulate(set, scenario)?;
        counterexamples.extend(contradictions(&analysis, &outcome, k));
        outcomes.push(outcome);
    }
    Ok(ConsistencyReport { analysis, outcomes, counterexamples })
}

/// Observations in `outcome` that contradict schedulable verdicts.
pub fn contradictions(analysis: &AnalysisReport, outcome: &SimOutcome, scenario: usize) -> Vec<Counterexample> {
    let mut found = Vec::new();
    for miss in &outcome.misses {
        if analysis.tasks[miss.task].verdict == Verdict::Schedulable {
            let kind = CounterexampleKind::Miss { completion: miss.completion.clone() };
            found.push(Counterexample { scenario, task: miss.task, job: miss.job, kind });
        }
    }
    for job in &outcome.jobs {
        let Some(bound) = &analysis.tasks[job.task].response else { continue };
        let end = job.completion.as_ref().unwrap_or(&outcome.horizon);
        let observed = end - &job.release;
        if &observed > bound {
            let kind = CounterexampleKind::ResponseAboveBound { observed, bound: bound.clone() };
            found.push(Counterexample { scenario, task: job.task, job: job.index, kind });
        }
    }
    found
}
