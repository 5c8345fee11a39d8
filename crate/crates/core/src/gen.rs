//! Random DAG task sets: layered graphs, UUniFast utilizations, integer
//! costs.
//!
//! Every random draw comes from a ChaCha stream selected by
//! `(attempt, purpose)`, so a task's graph depends only on the seed, the
//! attempt and the task's position, not on how much randomness other tasks
//! consumed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::critical_path_length;
use crate::model::{validate_with, DagTask, Node, RawTask, TaskSet, ValidateOptions};
use crate::time::Time;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("InvalidParams: {0}")]
    InvalidParams(String),
    #[error("InfeasibleParams: {0}")]
    InfeasibleParams(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DeadlineMode {
    /// `D = T`.
    #[default]
    Implicit,
    /// `D` drawn uniformly from the integers in `[len, T]`.
    Uniform,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CostMode {
    /// `c_min = c_max`.
    #[default]
    Fixed,
    /// `c_min = ⌈c_max / 2⌉`.
    Half,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub n_tasks: usize,
    pub cores: usize,
    /// Inclusive range of real (non-virtual) nodes per task.
    pub nodes: (usize, usize),
    /// Inclusive range of layers per task, capped by the node count.
    pub layers: (usize, usize),
    pub edge_probability: f64,
    /// Target `Σ C_i / T_i`.
    pub utilization: f64,
    /// Inclusive range of integer `c_max` values.
    pub costs: (u32, u32),
    pub cost_mode: CostMode,
    pub deadline_mode: DeadlineMode,
    pub seed: u64,
    /// Whole-set resamples before giving up with `InfeasibleParams`.
    pub max_attempts: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_tasks: 5,
            cores: 4,
            nodes: (3, 10),
            layers: (2, 5),
            edge_probability: 0.3,
            utilization: 2.0,
            costs: (1, 20),
            cost_mode: CostMode::Fixed,
            deadline_mode: DeadlineMode::Implicit,
            seed: 0,
            max_attempts: 1000,
        }
    }
}

/// Generated utilization must land in `[(1 − UTILIZATION_SLACK)·U, U]`.
pub const UTILIZATION_SLACK: f64 = 0.05;

impl GenParams {
    pub fn check(&self) -> Result<(), GenError> {
        let bad = |msg: String| Err(GenError::InvalidParams(msg));
        if self.n_tasks == 0 {
            return bad("n_tasks must be at least 1".into());
        }
        if self.cores == 0 {
            return bad("cores must be at least 1".into());
        }
        if self.nodes.0 == 0 || self.nodes.0 > self.nodes.1 {
            return bad(format!("node range {:?} must be non-empty and start at 1 or more", self.nodes));
        }
        if self.layers.0 == 0 || self.layers.0 > self.layers.1 {
            return bad(format!("layer range {:?} must be non-empty and start at 1 or more", self.layers));
        }
        if !(0.0..=1.0).contains(&self.edge_probability) {
            return bad(format!("edge probability {} is outside [0, 1]", self.edge_probability));
        }
        if !(self.utilization.is_finite() && self.utilization > 0.0) {
            return bad(format!("utilization {} must be positive", self.utilization));
        }
        if self.costs.0 > self.costs.1 || self.costs.1 == 0 {
            return bad(format!("cost range {:?} must be non-empty and allow a positive cost", self.costs));
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1".into());
        }
        Ok(())
    }
}

/// Independent random stream for `(attempt, purpose)`. Purpose 0 is the
/// utilization split, purpose `i + 1` is task `i`.
pub fn stream(seed: u64, attempt: usize, purpose: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((attempt as u64) << 32) | purpose as u64);
    rng
}

/// A layered random DAG named `id`. Nodes are spread over the layers (each
/// layer non-empty) and an edge joins a node to each node of a later layer
/// with the configured probability. Several sources or sinks get a
/// zero-cost virtual entry or exit. Timing is `D = T = max(C, 1)`
/// until [`generate_taskset`] sets it.
pub fn generate_dag(params: &GenParams, id: &str, rng: &mut ChaCha8Rng) -> DagTask {
    let n = rng.gen_range(params.nodes.0..=params.nodes.1);
    let layers = rng.gen_range(params.layers.0..=params.layers.1).min(n);

    // One node per layer, the rest scattered.
    let mut layer_of: Vec<usize> = (0..layers).collect();
    layer_of.extend((layers..n).map(|_| rng.gen_range(0..layers)));
    layer_of.sort_unstable();

    let nodes: Vec<Node> = (0..n)
        .map(|i| {
            let c_max = rng.gen_range(params.costs.0..=params.costs.1);
            let c_min = match params.cost_mode {
                CostMode::Fixed => c_max,
                CostMode::Half => c_max.div_ceil(2),
            };
            Node::new(format!("v{}", i + 1), Time::from(c_min), Time::from(c_max))
        })
        .collect();

    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if layer_of[b] > layer_of[a] && rng.gen_bool(params.edge_probability) {
                edges.push((nodes[a].id.clone(), nodes[b].id.clone()));
            }
        }
    }

    let total: Time = nodes.iter().map(|v| &v.c_max).sum();
    let period = total.max(Time::ONE);
    let raw = RawTask { id: id.to_string(), nodes, edges, deadline: period.clone(), period };
    validate_with(&raw, ValidateOptions { wrap_terminals: true }).expect("layered graphs are acyclic")
}

/// UUniFast: `n` non-negative shares summing to `total`.
pub fn uunifast(total: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut shares = Vec::with_capacity(n);
    let mut rest = total;
    for i in 1..n {
        let next = rest * rng.gen::<f64>().powf(1.0 / (n - i) as f64);
        shares.push(rest - next);
        rest = next;
    }
    shares.push(rest);
    shares
}

/// A validated task set in deadline-monotonic order.
///
/// Utilizations are split with UUniFast and periods set to `⌈C_i / U_i⌉`.
/// The whole set is resampled while some `T_i < len_i`, some cost sum is
/// zero, or rounding pushed the utilization below the allowed slack.
pub fn generate_taskset(params: &GenParams) -> Result<TaskSet, GenError> {
    params.check()?;
    for attempt in 0..params.max_attempts {
        if let Some(set) = try_generate(params, attempt) {
            return Ok(set);
        }
    }
    Err(GenError::InfeasibleParams(format!(
        "no task set with utilization {} on {} tasks satisfied T >= len after {} attempts",
        params.utilization, params.n_tasks, params.max_attempts
    )))
}

fn try_generate(params: &GenParams, attempt: usize) -> Option<TaskSet> {
    let shares = uunifast(params.utilization, params.n_tasks, &mut stream(params.seed, attempt, 0));
    let width = params.n_tasks.to_string().len();
    let mut tasks = Vec::with_capacity(params.n_tasks);
    for (i, share) in shares.into_iter().enumerate() {
        let mut rng = stream(params.seed, attempt, i + 1);
        let id = format!("t{:0width$}", i + 1);
        let dag = generate_dag(params, &id, &mut rng);
        let wcet = dag.total_wcet().to_f64();
        if wcet == 0.0 || share <= 0.0 {
            return None;
        }
        let period = (wcet / share).ceil();
        if !(1.0..=1e15).contains(&period) {
            return None;
        }
        let period = Time::from_integer(period as i64);
        let len = critical_path_length(&dag);
        if period < len {
            return None;
        }
        let deadline = match params.deadline_mode {
            DeadlineMode::Implicit => period.clone(),
            DeadlineMode::Uniform => {
                let lo = len.to_i64().expect("integer costs");
                let hi = period.to_i64().expect("integer period");
                Time::from_integer(rng.gen_range(lo..=hi))
            }
        };
        tasks.push(dag.with_timing(deadline, period).ok()?);
    }
    let set = TaskSet::new(tasks, params.cores).ok()?;
    let achieved = set.utilization().to_f64();
    if achieved < (1.0 - UTILIZATION_SLACK) * params.utilization {
        return None;
    }
    Some(set.deadline_monotonic())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{max_parallelism, timing_profile};

    #[test]
    fn dag_generation_is_deterministic() {
        let params = GenParams::default();
        let a = generate_dag(&params, "t", &mut stream(42, 0, 1));
        let b = generate_dag(&params, "t", &mut stream(42, 0, 1));
        assert_eq!(a, b);
    }

    #[test]
    fn single_layer_without_edges_is_fully_parallel() {
        let params = GenParams { nodes: (5, 5), layers: (1, 1), edge_probability: 0.0, ..GenParams::default() };
        let dag = generate_dag(&params, "t", &mut stream(1, 0, 1));
        assert_eq!(dag.node_count(), 7);
        assert_eq!(dag.node(dag.entry()).c_max, Time::ZERO);
        assert_eq!(dag.node(dag.exit()).c_max, Time::ZERO);
        assert_eq!(max_parallelism(&dag), 5);
    }

    #[test]
    fn full_edges_on_singleton_layers_give_a_chain() {
        let params = GenParams { nodes: (6, 6), layers: (6, 6), edge_probability: 1.0, ..GenParams::default() };
        let dag = generate_dag(&params, "t", &mut stream(3, 0, 1));
        assert_eq!(dag.node_count(), 6);
        assert_eq!(timing_profile(&dag, 4).self_interference, Time::ZERO);
    }

    #[test]
    fn half_cost_mode() {
        let params = GenParams { cost_mode: CostMode::Half, ..GenParams::default() };
        let dag = generate_dag(&params, "t", &mut stream(5, 0, 1));
        for node in dag.nodes() {
            assert_eq!(node.c_min, (&node.c_max / &Time::from_integer(2)).ceil());
        }
    }

    #[test]
    fn uunifast_sums_to_total() {
        let shares = uunifast(2.5, 6, &mut stream(0, 0, 0));
        assert_eq!(shares.len(), 6);
        assert!(shares.iter().all(|&u| u >= 0.0));
        assert!((shares.iter().sum::<f64>() - 2.5).abs() < 1e-9);
    }

    #[test]
    fn implicit_sets_have_equal_deadlines_and_periods() {
        let params = GenParams { utilization: 0.5, n_tasks: 4, seed: 11, ..GenParams::default() };
        let set = generate_taskset(&params).unwrap();
        assert!(set.tasks().iter().all(|t| t.deadline() == t.period()));
        let u = set.utilization().to_f64();
        assert!(u <= 0.5 + 1e-12 && u >= 0.475);
        assert_eq!(set, generate_taskset(&params).unwrap());
    }

    #[test]
    fn uniform_deadlines_cover_the_critical_path() {
        let params = GenParams { deadline_mode: DeadlineMode::Uniform, seed: 3, ..GenParams::default() };
        let set = generate_taskset(&params).unwrap();
        for (i, t) in set.tasks().iter().enumerate() {
            assert!(&critical_path_length(t) <= t.deadline() && t.deadline() <= t.period());
            if i > 0 {
                assert!(set.task(i - 1).deadline() <= t.deadline());
            }
        }
    }

    #[test]
    fn impossible_targets_are_reported() {
        // One single-node task cannot reach utilization 3.
        let params = GenParams { n_tasks: 1, nodes: (1, 1), utilization: 3.0, max_attempts: 20, ..GenParams::default() };
        assert!(matches!(generate_taskset(&params), Err(GenError::InfeasibleParams(_))));
        let params = GenParams { edge_probability: 1.5, ..GenParams::default() };
        assert!(matches!(generate_taskset(&params), Err(GenError::InvalidParams(_))));
    }
}
