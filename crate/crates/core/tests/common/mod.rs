//! Random task builders shared by the integration tests.
#![allow(dead_code)]

use dagrta::model::{validate_with, DagTask, Node, RawTask, ValidateOptions};
use dagrta::Time;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn int(v: i64) -> Time {
    Time::from_integer(v)
}

/// Arbitrary (not layered) random DAG with `real` nodes, integer costs in
/// `[0, max_cost]` and edges `i → j` (i < j) kept with probability `p`.
/// Several sources or sinks are wrapped with virtual terminals, so the node
/// count can grow by two. Period and deadline are `max(C, 1)`.
pub fn random_dag(rng: &mut ChaCha8Rng, real: usize, max_cost: i64, p: f64) -> DagTask {
    let nodes: Vec<Node> = (0..real)
        .map(|i| {
            let c_max = rng.gen_range(0..=max_cost);
            let c_min = rng.gen_range(0..=c_max);
            Node::new(format!("n{i}"), int(c_min), int(c_max))
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..real {
        for b in a + 1..real {
            if rng.gen_bool(p) {
                edges.push((format!("n{a}"), format!("n{b}")));
            }
        }
    }
    let total: i64 = nodes.iter().map(|n| n.c_max.to_i64().unwrap()).sum();
    let period = int(total.max(1));
    let raw = RawTask { id: "t".into(), nodes, edges, deadline: period.clone(), period };
    validate_with(&raw, ValidateOptions { wrap_terminals: true }).unwrap()
}

/// All node-index paths from `from` to `to` by depth-first enumeration.
pub fn enumerate_paths(task: &DagTask, from: usize, to: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut stack = vec![vec![from]];
    while let Some(path) = stack.pop() {
        let last = *path.last().unwrap();
        if last == to {
            out.push(path);
            continue;
        }
        for &s in task.successors(last) {
            let mut next = path.clone();
            next.push(s);
            stack.push(next);
        }
    }
    out
}

pub fn path_cost(task: &DagTask, path: &[usize], min: bool) -> Time {
    path.iter().map(|&v| if min { &task.node(v).c_min } else { &task.node(v).c_max }).sum()
}
