//! Intra-task analyses: release windows, critical paths, self-interference
//! and the isolated response-time bound.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::ops::Index;

use crate::model::DagTask;
use crate::time::Time;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("UnknownNode: task {task} has no node {node}")]
    UnknownNode { task: String, node: String },
    #[error("NotConnected: in task {task}, {to} is not reachable from {from}")]
    NotConnected { task: String, from: String, to: String },
    #[error("NotAPath: in task {task}, there is no edge {from} -> {to}")]
    NotAPath { task: String, from: String, to: String },
}

/// Which execution requirement a backward pass charges to each node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CostBasis {
    Min,
    #[default]
    Max,
}

/// Per-node times, indexed by the node's topological index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeTimes(Vec<Time>);

impl NodeTimes {
    pub fn as_slice(&self) -> &[Time] {
        &self.0
    }

    pub fn get(&self, task: &DagTask, node: &str) -> Option<&Time> {
        task.index_of(node).map(|i| &self.0[i])
    }

    /// Keyed by node id.
    pub fn to_map(&self, task: &DagTask) -> BTreeMap<String, Time> {
        task.nodes().iter().map(|n| n.id.clone()).zip(self.0.iter().cloned()).collect()
    }
}

impl Index<usize> for NodeTimes {
    type Output = Time;
    fn index(&self, index: usize) -> &Time {
        &self.0[index]
    }
}

/// Earliest release time of every node: all predecessors run for their
/// minimum execution requirement and nothing interferes.
pub fn earliest_release_times(task: &DagTask) -> NodeTimes {
    let n = task.node_count();
    let mut earliest: Vec<Time> = Vec::with_capacity(n);
    for v in 0..n {
        let e = task
            .predecessors(v)
            .iter()
            .map(|&p| &earliest[p] + &task.node(p).c_min)
            .max()
            .unwrap_or(Time::ZERO);
        earliest.push(e);
    }
    NodeTimes(earliest)
}

/// Latest release time of every node relative to the entry node, with node
/// costs taken from `basis`. The exit node's own cost never shifts any
/// release, so `latest[exit] = len − c[exit]`.
pub fn latest_release_times(task: &DagTask, basis: CostBasis) -> NodeTimes {
    let n = task.node_count();
    let cost = |v: usize| match basis {
        CostBasis::Min => &task.node(v).c_min,
        CostBasis::Max => &task.node(v).c_max,
    };
    // Offsets measured backwards from the exit's release (all ≤ 0).
    let mut back = vec![Time::ZERO; n];
    for v in (0..n).rev() {
        if v == task.exit() {
            continue;
        }
        let earliest_child = task
            .successors(v)
            .iter()
            .map(|&s| &back[s])
            .min()
            .expect("non-exit node has a successor")
            .clone();
        back[v] = earliest_child - cost(v);
    }
    let origin = back[task.entry()].clone();
    NodeTimes(back.into_iter().map(|b| b - &origin).collect())
}

/// Length of the longest `c_max`-weighted entry→exit path.
pub fn critical_path_length(task: &DagTask) -> Time {
    let n = task.node_count();
    let mut finish: Vec<Time> = Vec::with_capacity(n);
    for v in 0..n {
        let start = task.predecessors(v).iter().map(|&p| &finish[p]).max().cloned().unwrap_or(Time::ZERO);
        finish.push(start + &task.node(v).c_max);
    }
    finish[task.exit()].clone()
}

/// A sequence of nodes joined by edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePath {
    indices: Vec<usize>,
    ids: Vec<String>,
    total_cost: Time,
}

impl NodePath {
    /// Builds a path from node ids, checking that consecutive nodes are
    /// joined by an edge.
    pub fn new(task: &DagTask, ids: &[&str]) -> Result<NodePath, GraphError> {
        let indices = ids
            .iter()
            .map(|id| {
                task.index_of(id).ok_or_else(|| GraphError::UnknownNode {
                    task: task.id().to_string(),
                    node: id.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        for pair in indices.windows(2) {
            if !task.successors(pair[0]).contains(&pair[1]) {
                return Err(GraphError::NotAPath {
                    task: task.id().to_string(),
                    from: task.node(pair[0]).id.clone(),
                    to: task.node(pair[1]).id.clone(),
                });
            }
        }
        Ok(NodePath::from_indices(task, indices))
    }

    fn from_indices(task: &DagTask, indices: Vec<usize>) -> NodePath {
        let ids = indices.iter().map(|&i| task.node(i).id.clone()).collect();
        let total_cost = indices.iter().map(|&i| &task.node(i).c_max).sum();
        NodePath { indices, ids, total_cost }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Sum of `c_max` along the path.
    pub fn total_cost(&self) -> &Time {
        &self.total_cost
    }
}

/// The maximum-cost path from `from` to `to` (both inclusive). Among paths
/// of equal cost the lexicographically smallest node-id sequence wins.
pub fn critical_partial_path(task: &DagTask, from: &str, to: &str) -> Result<NodePath, GraphError> {
    let unknown = |node: &str| GraphError::UnknownNode { task: task.id().to_string(), node: node.to_string() };
    let source = task.index_of(from).ok_or_else(|| unknown(from))?;
    let target = task.index_of(to).ok_or_else(|| unknown(to))?;
    best_path(task, source, target).ok_or_else(|| GraphError::NotConnected {
        task: task.id().to_string(),
        from: from.to_string(),
        to: to.to_string(),
    })
}

/// The critical path of the whole task, entry to exit.
pub fn critical_path(task: &DagTask) -> NodePath {
    best_path(task, task.entry(), task.exit()).expect("exit is reachable from entry")
}

fn best_path(task: &DagTask, source: usize, target: usize) -> Option<NodePath> {
    if source > target {
        return None;
    }
    let id_order = |a: &[usize], b: &[usize]| -> Ordering {
        a.iter().map(|&i| &task.node(i).id).cmp(b.iter().map(|&i| &task.node(i).id))
    };
    // best[v]: (cost, path) of the best v→target path; indices above
    // `target` can never reach it.
    let mut best: Vec<Option<(Time, Vec<usize>)>> = vec![None; target + 1];
    best[target] = Some((task.node(target).c_max.clone(), vec![target]));
    for v in (source..target).rev() {
        let mut choice: Option<&(Time, Vec<usize>)> = None;
        for &s in task.successors(v) {
            let Some(Some(candidate)) = best.get(s) else { continue };
            choice = match choice {
                None => Some(candidate),
                Some(current) => match candidate.0.cmp(&current.0) {
                    Ordering::Greater => Some(candidate),
                    Ordering::Equal if id_order(&candidate.1, &current.1) == Ordering::Less => Some(candidate),
                    _ => Some(current),
                },
            };
        }
        best[v] = choice.map(|(cost, path)| {
            let mut full = Vec::with_capacity(path.len() + 1);
            full.push(v);
            full.extend_from_slice(path);
            (cost + &task.node(v).c_max, full)
        });
    }
    best[source].take().map(|(_, path)| NodePath::from_indices(task, path))
}

/// `cost(path) + (1/m)·Σ c_max` over the nodes not on `path`: the response
/// of the path when every other node of the task may delay it.
pub fn partial_path_self_interference_bound(task: &DagTask, path: &NodePath, cores: usize) -> Time {
    let on_path: BTreeSet<usize> = path.indices().iter().copied().collect();
    let off_path: Time = (0..task.node_count())
        .filter(|i| !on_path.contains(i))
        .map(|i| &task.node(i).c_max)
        .sum();
    path.total_cost() + &(off_path / Time::from(cores))
}

/// Strict transitive closure: `reach[a][b]` iff there is a non-empty path a→b.
pub fn reachability(task: &DagTask) -> Vec<Vec<bool>> {
    let n = task.node_count();
    let mut reach = vec![vec![false; n]; n];
    for v in (0..n).rev() {
        for &s in task.successors(v) {
            reach[v][s] = true;
            // Successors have larger indices and are already closed.
            for w in s + 1..n {
                if reach[s][w] {
                    reach[v][w] = true;
                }
            }
        }
    }
    reach
}

/// Nodes that may execute concurrently with `node`: neither ancestors nor
/// descendants of it.
pub fn concurrent_set(task: &DagTask, node: &str) -> Result<BTreeSet<String>, GraphError> {
    let v = task.index_of(node).ok_or_else(|| GraphError::UnknownNode {
        task: task.id().to_string(),
        node: node.to_string(),
    })?;
    let reach = reachability(task);
    Ok((0..task.node_count())
        .filter(|&k| k != v && !reach[v][k] && !reach[k][v])
        .map(|k| task.node(k).id.clone())
        .collect())
}

/// Size of a maximum set of pairwise-concurrent nodes (a maximum antichain
/// of the precedence order), computed as `n − |maximum matching|` on the
/// comparability graph.
pub fn max_parallelism(task: &DagTask) -> usize {
    let n = task.node_count();
    let reach = reachability(task);
    let mut matched_right: Vec<Option<usize>> = vec![None; n];

    fn augment(
        v: usize,
        reach: &[Vec<bool>],
        seen: &mut [bool],
        matched_right: &mut [Option<usize>],
    ) -> bool {
        for w in 0..reach.len() {
            if reach[v][w] && !seen[w] {
                seen[w] = true;
                if matched_right[w].is_none_or(|u| augment(u, reach, seen, matched_right)) {
                    matched_right[w] = Some(v);
                    return true;
                }
            }
        }
        false
    }

    let mut matching = 0;
    for v in 0..n {
        let mut seen = vec![false; n];
        if augment(v, &reach, &mut seen, &mut matched_right) {
            matching += 1;
        }
    }
    n - matching
}

/// Everything the analysis needs to know about one task in isolation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingProfile {
    pub earliest: NodeTimes,
    pub latest: NodeTimes,
    pub critical_path_length: Time,
    pub total_wcet: Time,
    pub self_interference: Time,
    pub r_isolated: Time,
}

/// Builds the timing profile of `task` on `cores` cores with the default
/// `c_max` basis for latest release times.
pub fn timing_profile(task: &DagTask, cores: usize) -> TimingProfile {
    timing_profile_with(task, cores, CostBasis::Max)
}

pub fn timing_profile_with(task: &DagTask, cores: usize, basis: CostBasis) -> TimingProfile {
    assert!(cores >= 1, "at least one core");
    let critical_path_length = critical_path_length(task);
    let total_wcet = task.total_wcet().clone();
    let self_interference = &total_wcet - &critical_path_length;
    let r_isolated = &critical_path_length + &(&self_interference / &Time::from(cores));
    TimingProfile {
        earliest: earliest_release_times(task),
        latest: latest_release_times(task, basis),
        critical_path_length,
        total_wcet,
        self_interference,
        r_isolated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, Node, RawTask};

    fn int(v: i64) -> Time {
        Time::from_integer(v)
    }

    fn task(costs: &[(&str, i64)], edges: &[(&str, &str)]) -> DagTask {
        validate(&RawTask {
            id: "t".into(),
            nodes: costs.iter().map(|(n, c)| Node::fixed(*n, int(*c))).collect(),
            edges: edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            deadline: int(15),
            period: int(20),
        })
        .unwrap()
    }

    fn diamond_with(v3: i64) -> DagTask {
        task(
            &[("v1", 2), ("v2", 3), ("v3", v3), ("v4", 2)],
            &[("v1", "v2"), ("v1", "v3"), ("v2", "v4"), ("v3", "v4")],
        )
    }

    fn chain() -> DagTask {
        task(&[("a", 1), ("b", 1), ("c", 1)], &[("a", "b"), ("b", "c")])
    }

    fn single() -> DagTask {
        task(&[("v", 4)], &[])
    }

    fn map(entries: &[(&str, i64)]) -> BTreeMap<String, Time> {
        entries.iter().map(|(k, v)| (k.to_string(), int(*v))).collect()
    }

    #[test]
    fn earliest_release_times_examples() {
        let d = diamond_with(1);
        assert_eq!(earliest_release_times(&d).to_map(&d), map(&[("v1", 0), ("v2", 2), ("v3", 2), ("v4", 5)]));
        let s = single();
        assert_eq!(earliest_release_times(&s).to_map(&s), map(&[("v", 0)]));
        let c = chain();
        assert_eq!(earliest_release_times(&c).to_map(&c), map(&[("a", 0), ("b", 1), ("c", 2)]));
    }

    #[test]
    fn latest_release_times_examples() {
        let d = diamond_with(1);
        assert_eq!(
            latest_release_times(&d, CostBasis::Max).to_map(&d),
            map(&[("v1", 0), ("v2", 2), ("v3", 4), ("v4", 5)])
        );
        let s = single();
        assert_eq!(latest_release_times(&s, CostBasis::Max).to_map(&s), map(&[("v", 0)]));
        let c = chain();
        assert_eq!(latest_release_times(&c, CostBasis::Max).to_map(&c), map(&[("a", 0), ("b", 1), ("c", 2)]));
    }

    #[test]
    fn latest_release_basis_selects_the_cost() {
        let d = validate(&RawTask {
            id: "t".into(),
            nodes: vec![
                Node::new("a", int(1), int(3)),
                Node::new("b", int(1), int(1)),
            ],
            edges: vec![("a".into(), "b".into())],
            deadline: int(10),
            period: int(10),
        })
        .unwrap();
        assert_eq!(latest_release_times(&d, CostBasis::Max)[1], int(3));
        assert_eq!(latest_release_times(&d, CostBasis::Min)[1], int(1));
        assert_eq!(earliest_release_times(&d)[1], int(1));
    }

    #[test]
    fn critical_path_examples() {
        let d = diamond_with(1);
        let p = critical_path(&d);
        assert_eq!(p.ids(), &["v1", "v2", "v4"]);
        assert_eq!(p.total_cost(), &int(7));
        let c = chain();
        assert_eq!(critical_path(&c).ids(), &["a", "b", "c"]);
        assert_eq!(critical_path(&c).total_cost(), &int(3));
        let tie = diamond_with(3);
        assert_eq!(critical_path(&tie).ids(), &["v1", "v2", "v4"]);
        assert_eq!(critical_path(&tie).total_cost(), &int(7));
    }

    #[test]
    fn tie_break_is_lexicographic_not_positional() {
        // "b" is declared first, but "a" sorts first.
        let t = task(
            &[("s", 1), ("b", 2), ("a", 2), ("x", 1)],
            &[("s", "b"), ("s", "a"), ("b", "x"), ("a", "x")],
        );
        assert_eq!(critical_path(&t).ids(), &["s", "a", "x"]);
    }

    #[test]
    fn timing_profile_examples() {
        let d = diamond_with(1);
        let p = timing_profile(&d, 2);
        assert_eq!(p.critical_path_length, int(7));
        assert_eq!(p.total_wcet, int(8));
        assert_eq!(p.self_interference, int(1));
        assert_eq!(p.r_isolated, Time::new(15, 2));
        assert_eq!(timing_profile(&d, 1).r_isolated, int(8));
        let c = chain();
        for m in 1..5 {
            let p = timing_profile(&c, m);
            assert_eq!(p.self_interference, Time::ZERO);
            assert_eq!(p.r_isolated, int(3));
        }
    }

    #[test]
    fn concurrent_set_examples() {
        let d = diamond_with(1);
        assert_eq!(concurrent_set(&d, "v2").unwrap(), BTreeSet::from(["v3".to_string()]));
        assert!(concurrent_set(&d, "v1").unwrap().is_empty());
        assert!(concurrent_set(&chain(), "b").unwrap().is_empty());
        assert!(matches!(concurrent_set(&d, "zz"), Err(GraphError::UnknownNode { .. })));
    }

    #[test]
    fn critical_partial_path_examples() {
        let d = diamond_with(1);
        let p = critical_partial_path(&d, "v1", "v4").unwrap();
        assert_eq!(p.ids(), &["v1", "v2", "v4"]);
        assert_eq!(p.total_cost(), &int(7));
        let p = critical_partial_path(&d, "v2", "v4").unwrap();
        assert_eq!(p.ids(), &["v2", "v4"]);
        assert_eq!(p.total_cost(), &int(5));
        assert!(matches!(critical_partial_path(&d, "v2", "v3"), Err(GraphError::NotConnected { .. })));
        assert!(matches!(critical_partial_path(&d, "v4", "v1"), Err(GraphError::NotConnected { .. })));
        assert_eq!(critical_partial_path(&d, "v3", "v3").unwrap().ids(), &["v3"]);
    }

    #[test]
    fn self_interference_bound_examples() {
        let d = diamond_with(1);
        let p = NodePath::new(&d, &["v1", "v2", "v4"]).unwrap();
        assert_eq!(partial_path_self_interference_bound(&d, &p, 2), Time::new(15, 2));
        let q = NodePath::new(&d, &["v1", "v3", "v4"]).unwrap();
        assert_eq!(partial_path_self_interference_bound(&d, &q, 2), Time::new(13, 2));
        let c = chain();
        let full = critical_path(&c);
        assert_eq!(partial_path_self_interference_bound(&c, &full, 3), int(3));
        assert!(matches!(NodePath::new(&d, &["v2", "v3"]), Err(GraphError::NotAPath { .. })));
    }

    #[test]
    fn max_parallelism_examples() {
        assert_eq!(max_parallelism(&diamond_with(1)), 2);
        assert_eq!(max_parallelism(&chain()), 1);
        assert_eq!(max_parallelism(&single()), 1);
        let fork = task(
            &[("s", 0), ("a", 1), ("b", 1), ("c", 1), ("x", 0)],
            &[("s", "a"), ("s", "b"), ("s", "c"), ("a", "x"), ("b", "x"), ("c", "x")],
        );
        assert_eq!(max_parallelism(&fork), 3);
    }
}
