//! Sporadic DAG tasks and task sets.
//!
//! A [`DagTask`] can only be obtained through [`validate`], so every value of
//! that type is acyclic, has a single entry and a single exit node, a
//! constrained deadline and well-formed node costs. Nodes are stored in a
//! topological order; a node's position in that order is its *index*.

use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::time::Time;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("EmptyTask: task {task} has no nodes")]
    EmptyTask { task: String },
    #[error("DuplicateNode: task {task} declares node {node} more than once")]
    DuplicateNode { task: String, node: String },
    #[error("DanglingEdge: task {task} has edge {from} -> {to} referencing an unknown node")]
    DanglingEdge { task: String, from: String, to: String },
    #[error("DuplicateEdge: task {task} declares edge {from} -> {to} more than once")]
    DuplicateEdge { task: String, from: String, to: String },
    #[error("CycleDetected: task {task} contains the cycle {}", cycle.join(" -> "))]
    CycleDetected { task: String, cycle: Vec<String> },
    #[error("MultipleEntryOrExit: task {task} has entry nodes [{}] and exit nodes [{}]", entries.join(", "), exits.join(", "))]
    MultipleEntryOrExit { task: String, entries: Vec<String>, exits: Vec<String> },
    #[error("NegativeOrInvertedCost: task {task} node {node} has cost interval [{c_min}, {c_max}]")]
    NegativeOrInvertedCost { task: String, node: String, c_min: Time, c_max: Time },
    #[error("DeadlineExceedsPeriod: task {task} has deadline {deadline} greater than period {period}")]
    DeadlineExceedsPeriod { task: String, deadline: Time, period: Time },
    #[error("InvalidTiming: task {task} needs a positive period and a non-negative deadline (period {period}, deadline {deadline})")]
    InvalidTiming { task: String, deadline: Time, period: Time },
    #[error("EmptyTaskSet: a task set needs at least one task")]
    EmptyTaskSet,
    #[error("InvalidCores: a platform needs at least one core")]
    InvalidCores,
    #[error("DuplicateTask: task id {task} is used more than once")]
    DuplicateTask { task: String },
}

/// A sub-job of a DAG task with an execution-time interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    #[serde(rename = "cmin")]
    pub c_min: Time,
    #[serde(rename = "cmax")]
    pub c_max: Time,
}

impl Node {
    pub fn new(id: impl Into<String>, c_min: Time, c_max: Time) -> Node {
        Node { id: id.into(), c_min, c_max }
    }

    /// A node whose execution requirement is exactly `cost`.
    pub fn fixed(id: impl Into<String>, cost: Time) -> Node {
        Node { id: id.into(), c_min: cost.clone(), c_max: cost }
    }
}

/// An unchecked task description, as read from a file or built by hand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTask {
    pub id: String,
    pub nodes: Vec<Node>,
    pub edges: Vec<(String, String)>,
    pub deadline: Time,
    pub period: Time,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValidateOptions {
    /// Add zero-cost virtual entry/exit nodes when a graph has several
    /// sources or sinks instead of rejecting it.
    pub wrap_terminals: bool,
}

pub const VIRTUAL_ENTRY: &str = "_entry";
pub const VIRTUAL_EXIT: &str = "_exit";

/// A validated sporadic DAG task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DagTask {
    id: String,
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
    deadline: Time,
    period: Time,
    total_wcet: Time,
}

/// Validates `raw` with default options (multi-entry/exit graphs rejected).
pub fn validate(raw: &RawTask) -> Result<DagTask, ModelError> {
    validate_with(raw, ValidateOptions::default())
}

pub fn validate_with(raw: &RawTask, options: ValidateOptions) -> Result<DagTask, ModelError> {
    let task = || raw.id.clone();
    if raw.nodes.is_empty() {
        return Err(ModelError::EmptyTask { task: task() });
    }
    if !raw.period.is_positive() || raw.deadline.is_negative() {
        return Err(ModelError::InvalidTiming {
            task: task(),
            deadline: raw.deadline.clone(),
            period: raw.period.clone(),
        });
    }
    if raw.deadline > raw.period {
        return Err(ModelError::DeadlineExceedsPeriod {
            task: task(),
            deadline: raw.deadline.clone(),
            period: raw.period.clone(),
        });
    }

    let mut nodes = raw.nodes.clone();
    let mut edges = raw.edges.clone();

    let mut position: HashMap<&str, usize> = HashMap::new();
    for (i, node) in raw.nodes.iter().enumerate() {
        if node.c_min.is_negative() || node.c_min > node.c_max {
            return Err(ModelError::NegativeOrInvertedCost {
                task: task(),
                node: node.id.clone(),
                c_min: node.c_min.clone(),
                c_max: node.c_max.clone(),
            });
        }
        if position.insert(node.id.as_str(), i).is_some() {
            return Err(ModelError::DuplicateNode { task: task(), node: node.id.clone() });
        }
    }

    let mut seen = BTreeSet::new();
    for (from, to) in &raw.edges {
        if !position.contains_key(from.as_str()) || !position.contains_key(to.as_str()) {
            return Err(ModelError::DanglingEdge { task: task(), from: from.clone(), to: to.clone() });
        }
        if from == to {
            return Err(ModelError::CycleDetected { task: task(), cycle: vec![from.clone(), to.clone()] });
        }
        if !seen.insert((from.as_str(), to.as_str())) {
            return Err(ModelError::DuplicateEdge { task: task(), from: from.clone(), to: to.clone() });
        }
    }

    let n = nodes.len();
    let mut has_pred = vec![false; n];
    let mut has_succ = vec![false; n];
    for (from, to) in &raw.edges {
        has_succ[position[from.as_str()]] = true;
        has_pred[position[to.as_str()]] = true;
    }
    let entries: Vec<String> =
        (0..n).filter(|&i| !has_pred[i]).map(|i| raw.nodes[i].id.clone()).collect();
    let exits: Vec<String> =
        (0..n).filter(|&i| !has_succ[i]).map(|i| raw.nodes[i].id.clone()).collect();

    // A cyclic graph may still have exactly one source and sink, so cycles
    // are looked for before the terminal check reports anything.
    if let Some(cycle) = find_cycle(n, &raw.edges, &position, &raw.nodes) {
        return Err(ModelError::CycleDetected { task: task(), cycle });
    }

    if entries.len() != 1 || exits.len() != 1 {
        if !options.wrap_terminals {
            return Err(ModelError::MultipleEntryOrExit { task: task(), entries, exits });
        }
        if entries.len() != 1 {
            let id = fresh_id(VIRTUAL_ENTRY, &position);
            for e in &entries {
                edges.push((id.clone(), e.clone()));
            }
            nodes.insert(0, Node::fixed(id, Time::ZERO));
        }
        if exits.len() != 1 {
            let id = fresh_id(VIRTUAL_EXIT, &position);
            for e in &exits {
                edges.push((e.clone(), id.clone()));
            }
            nodes.push(Node::fixed(id, Time::ZERO));
        }
    }

    Ok(DagTask::assemble(raw.id.clone(), nodes, &edges, raw.deadline.clone(), raw.period.clone()))
}

fn fresh_id(base: &str, taken: &HashMap<&str, usize>) -> String {
    let mut id = base.to_string();
    while taken.contains_key(id.as_str()) {
        id.push('_');
    }
    id
}

fn find_cycle(
    n: usize,
    edges: &[(String, String)],
    position: &HashMap<&str, usize>,
    nodes: &[Node],
) -> Option<Vec<String>> {
    let mut preds = vec![Vec::new(); n];
    let mut out_degree = vec![0usize; n];
    let mut succs = vec![Vec::new(); n];
    for (from, to) in edges {
        let (f, t) = (position[from.as_str()], position[to.as_str()]);
        preds[t].push(f);
        succs[f].push(t);
        out_degree[f] += 1;
    }
    // Peel sinks; whatever is left lies on or upstream of a cycle, and every
    // remaining node keeps at least one remaining successor.
    let mut removed = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&i| out_degree[i] == 0).collect();
    while let Some(v) = stack.pop() {
        removed[v] = true;
        for &p in &preds[v] {
            out_degree[p] -= 1;
            if out_degree[p] == 0 {
                stack.push(p);
            }
        }
    }
    let start = (0..n).find(|&i| !removed[i])?;
    let mut order = vec![usize::MAX; n];
    let mut walk = Vec::new();
    let mut v = start;
    while order[v] == usize::MAX {
        order[v] = walk.len();
        walk.push(v);
        v = *succs[v].iter().find(|&&s| !removed[s]).expect("remaining node keeps a successor");
    }
    let mut cycle: Vec<String> = walk[order[v]..].iter().map(|&i| nodes[i].id.clone()).collect();
    cycle.push(nodes[v].id.clone());
    Some(cycle)
}

impl DagTask {
    // Inputs are known to be acyclic, duplicate-free and single-terminal.
    fn assemble(id: String, nodes: Vec<Node>, edges: &[(String, String)], deadline: Time, period: Time) -> DagTask {
        let n = nodes.len();
        let original: HashMap<&str, usize> =
            nodes.iter().enumerate().map(|(i, v)| (v.id.as_str(), i)).collect();
        let mut succs = vec![Vec::new(); n];
        let mut in_degree = vec![0usize; n];
        for (from, to) in edges {
            let (f, t) = (original[from.as_str()], original[to.as_str()]);
            succs[f].push(t);
            in_degree[t] += 1;
        }

        // Kahn's algorithm, preferring the earliest declared node so the
        // normalized order is deterministic and close to the input order.
        let mut heap: BinaryHeap<Reverse<usize>> =
            (0..n).filter(|&i| in_degree[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(v)) = heap.pop() {
            order.push(v);
            for &s in &succs[v] {
                in_degree[s] -= 1;
                if in_degree[s] == 0 {
                    heap.push(Reverse(s));
                }
            }
        }
        debug_assert_eq!(order.len(), n);

        let mut rank = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            rank[old] = new;
        }
        let sorted_nodes: Vec<Node> = order.iter().map(|&old| nodes[old].clone()).collect();
        let mut new_edges: Vec<(usize, usize)> = edges
            .iter()
            .map(|(f, t)| (rank[original[f.as_str()]], rank[original[t.as_str()]]))
            .collect();
        new_edges.sort_unstable();

        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(f, t) in &new_edges {
            succs[f].push(t);
            preds[t].push(f);
        }
        let index = sorted_nodes.iter().enumerate().map(|(i, v)| (v.id.clone(), i)).collect();
        let total_wcet = sorted_nodes.iter().map(|v| &v.c_max).sum();

        DagTask {
            id,
            nodes: sorted_nodes,
            edges: new_edges,
            preds,
            succs,
            index,
            deadline,
            period,
            total_wcet,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Nodes in topological order.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &Node {
        &self.nodes[index]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Edges as pairs of node indices, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn predecessors(&self, index: usize) -> &[usize] {
        &self.preds[index]
    }

    pub fn successors(&self, index: usize) -> &[usize] {
        &self.succs[index]
    }

    pub fn index_of(&self, node: &str) -> Option<usize> {
        self.index.get(node).copied()
    }

    pub fn deadline(&self) -> &Time {
        &self.deadline
    }

    pub fn period(&self) -> &Time {
        &self.period
    }

    /// Index of the single entry node (always 0 in topological order).
    pub fn entry(&self) -> usize {
        0
    }

    /// Index of the single exit node (always the last one).
    pub fn exit(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Sum of the worst-case node costs.
    pub fn total_wcet(&self) -> &Time {
        &self.total_wcet
    }

    /// Converts back into the unchecked form, edges named by node id.
    pub fn to_raw(&self) -> RawTask {
        RawTask {
            id: self.id.clone(),
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|&(f, t)| (self.nodes[f].id.clone(), self.nodes[t].id.clone()))
                .collect(),
            deadline: self.deadline.clone(),
            period: self.period.clone(),
        }
    }

    /// Same graph with different timing parameters; the deadline must still
    /// satisfy the constrained-deadline model.
    pub fn with_timing(&self, deadline: Time, period: Time) -> Result<DagTask, ModelError> {
        let mut raw = self.to_raw();
        raw.deadline = deadline;
        raw.period = period;
        validate(&raw)
    }
}

/// An ordered set of DAG tasks on `cores` identical cores. Position 0 has
/// the highest priority.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSet {
    tasks: Vec<DagTask>,
    cores: usize,
}

impl TaskSet {
    pub fn new(tasks: Vec<DagTask>, cores: usize) -> Result<TaskSet, ModelError> {
        if tasks.is_empty() {
            return Err(ModelError::EmptyTaskSet);
        }
        if cores == 0 {
            return Err(ModelError::InvalidCores);
        }
        let mut ids = BTreeSet::new();
        for task in &tasks {
            if !ids.insert(task.id()) {
                return Err(ModelError::DuplicateTask { task: task.id().to_string() });
            }
        }
        Ok(TaskSet { tasks, cores })
    }

    pub fn tasks(&self) -> &[DagTask] {
        &self.tasks
    }

    pub fn task(&self, index: usize) -> &DagTask {
        &self.tasks[index]
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn cores(&self) -> usize {
        self.cores
    }

    /// Tasks with a higher priority than the task at `index`.
    pub fn higher_priority(&self, index: usize) -> &[DagTask] {
        &self.tasks[..index]
    }

    /// Total utilization `Σ C_i / T_i`.
    pub fn utilization(&self) -> Time {
        self.tasks.iter().map(|t| t.total_wcet() / t.period()).sum()
    }

    /// Reorders tasks by non-decreasing deadline, ties broken by id.
    pub fn deadline_monotonic(&self) -> TaskSet {
        let mut tasks = self.tasks.clone();
        tasks.sort_by(|a, b| a.deadline().cmp(b.deadline()).then_with(|| a.id().cmp(b.id())));
        TaskSet { tasks, cores: self.cores }
    }

    /// The first `len` tasks (highest priorities) on the same platform.
    pub fn prefix(&self, len: usize) -> TaskSet {
        assert!(len >= 1 && len <= self.tasks.len());
        TaskSet { tasks: self.tasks[..len].to_vec(), cores: self.cores }
    }

    pub fn with_cores(&self, cores: usize) -> Result<TaskSet, ModelError> {
        TaskSet::new(self.tasks.clone(), cores)
    }
}
