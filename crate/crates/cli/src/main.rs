//! `dagrta`: schedulability analysis, simulation and task-set generation
//! for sporadic DAG tasks under global fixed-priority scheduling.
//!
//! Exit codes: 0 = schedulable / no deadline miss, 1 = not schedulable /
//! misses observed, 2 = usage, input or I/O error.

mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dagrta::gen::{generate_taskset, CostMode, DeadlineMode, GenParams};
use dagrta::io::{read_task_set, to_json};
use dagrta::rta::{analyze, AnalysisConfig, Method};
use dagrta::sim::{simulate, write_trace, ExecutionPattern, ReleasePattern, Scenario};
use dagrta::{TaskSet, Time};

#[derive(Parser)]
#[command(name = "dagrta", version, about = "Response-time analysis for DAG tasks on multicores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute response-time bounds for every task of a task-set file.
    Analyze(AnalyzeArgs),
    /// Simulate a task set and report observed response times and misses.
    Simulate(SimulateArgs),
    /// Acceptance ratios of both tests over generated task sets, as CSV.
    Sweep(SweepArgs),
    /// Generate a random task set and write it as a task-set file.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Basic,
    Limited,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Basic => Method::Basic,
            MethodArg::Limited => Method::LimitedCarryIn,
        }
    }
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Priority {
    /// Task order in the file.
    #[default]
    File,
    /// Shorter relative deadline first, ties by task id.
    DeadlineMonotonic,
}

#[derive(Args)]
struct Input {
    /// Task-set file (JSON).
    file: PathBuf,
    #[arg(long, value_enum, default_value_t = Priority::File)]
    priority: Priority,
}

impl Input {
    fn load(&self) -> Result<TaskSet> {
        let set = read_task_set(&self.file)?;
        Ok(match self.priority {
            Priority::File => set,
            Priority::DeadlineMonotonic => set.deadline_monotonic(),
        })
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum, default_value = "basic")]
    method: MethodArg,
    /// Increment below which the fixed point continues on multiples of epsilon.
    #[arg(long, default_value = "1/1000000")]
    epsilon: Time,
    #[arg(long, default_value_t = 100_000)]
    max_iterations: usize,
    /// Print the report as JSON.
    #[arg(long, conflicts_with = "table")]
    json: bool,
    /// Print the report as a table (default).
    #[arg(long)]
    table: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    /// All tasks release together, then strictly periodically.
    Synchronous,
    /// Random inter-arrival times in [T, jitter·T].
    Sporadic,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostArg {
    /// Every node runs for c_max.
    Max,
    /// Node execution times drawn from [c_min, c_max].
    Random,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum, default_value = "synchronous")]
    scenario: ScenarioArg,
    #[arg(long, value_enum, default_value = "max")]
    cost: CostArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inter-arrival spread factor for sporadic releases (at least 1).
    #[arg(long, default_value = "3/2")]
    jitter: Time,
    /// Simulated time span; defaults to twice the largest period.
    #[arg(long)]
    horizon: Option<Time>,
    /// Write the event trace as CSV (`time,event,task,node,core`).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct GenFlags {
    #[arg(long, default_value_t = 5)]
    tasks: usize,
    #[arg(long, default_value_t = 4)]
    cores: usize,
    #[arg(long, default_value_t = 3)]
    min_nodes: usize,
    #[arg(long, default_value_t = 10)]
    max_nodes: usize,
    #[arg(long, default_value_t = 2)]
    min_layers: usize,
    #[arg(long, default_value_t = 5)]
    max_layers: usize,
    /// Probability of an edge between nodes of different layers.
    #[arg(long, default_value_t = 0.3)]
    edge_prob: f64,
    #[arg(long, default_value_t = 1)]
    min_cost: u32,
    #[arg(long, default_value_t = 20)]
    max_cost: u32,
    /// Set c_min = ceil(c_max / 2) instead of c_min = c_max.
    #[arg(long)]
    half_cmin: bool,
    #[arg(long, value_enum, default_value = "implicit")]
    deadline_mode: DeadlineArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Resamples before giving up on infeasible parameters.
    #[arg(long, default_value_t = 1000)]
    max_attempts: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeadlineArg {
    /// D = T.
    Implicit,
    /// D uniform in [len, T].
    Uniform,
}

impl GenFlags {
    fn params(&self, utilization: f64, seed: u64) -> GenParams {
        GenParams {
            n_tasks: self.tasks,
            cores: self.cores,
            nodes: (self.min_nodes, self.max_nodes),
            layers: (self.min_layers, self.max_layers),
            edge_probability: self.edge_prob,
            utilization,
            costs: (self.min_cost, self.max_cost),
            cost_mode: if self.half_cmin { CostMode::Half } else { CostMode::Fixed },
            deadline_mode: match self.deadline_mode {
                DeadlineArg::Implicit => DeadlineMode::Implicit,
                DeadlineArg::Uniform => DeadlineMode::Uniform,
            },
            seed,
            max_attempts: self.max_attempts,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    gen: GenFlags,
    /// Total utilizations (sum of C/T) to sweep, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    utilizations: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    sets_per_point: usize,
    /// Tests to evaluate; both by default.
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["basic", "limited"])]
    methods: Vec<MethodArg>,
    /// CSV output path; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    gen: GenFlags,
    /// Target total utilization (sum of C/T).
    #[arg(long, default_value_t = 2.0)]
    utilization: f64,
    /// Output path; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(args) => run_analyze(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Sweep(args) => run_sweep(args).map(|()| true),
        Command::Generate(args) => run_generate(args).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run_analyze(args: &AnalyzeArgs) -> Result<bool> {
    let set = args.input.load()?;
    let config = AnalysisConfig { method: args.method.into(), epsilon: args.epsilon.clone(), max_iterations: args.max_iterations };
    let report = analyze(&set, &config)?;
    let text = if args.json { output::analysis_json(&report) } else { output::analysis_table(&report) };
    print!("{text}");
    Ok(report.schedulable)
}

fn run_simulate(args: &SimulateArgs) -> Result<bool> {
    let set = args.input.load()?;
    let horizon = match &args.horizon {
        Some(h) => h.clone(),
        None => set.tasks().iter().map(|t| t.period()).max().expect("non-empty set") * &Time::from(2usize),
    };
    let release = match args.scenario {
        ScenarioArg::Synchronous => ReleasePattern::Synchronous,
        ScenarioArg::Sporadic => ReleasePattern::Sporadic { seed: args.seed, jitter: args.jitter.clone() },
    };
    let execution = match args.cost {
        CostArg::Max => ExecutionPattern::WorstCase,
        CostArg::Random => ExecutionPattern::Random { seed: args.seed },
    };
    let outcome = simulate(&set, &Scenario { release, execution, horizon })?;
    if let Some(path) = &args.trace {
        let mut out = create(path)?;
        write_trace(&set, &outcome.trace, &mut out).and_then(|()| out.flush()).with_context(|| format!("cannot write {}", path.display()))?;
    }
    print!("{}", output::simulation_summary(&set, &outcome));
    Ok(outcome.misses.is_empty())
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    if args.sets_per_point == 0 {
        bail!("--sets-per-point must be at least 1");
    }
    let methods: Vec<Method> = args.methods.iter().map(|&m| m.into()).collect();
    let mut csv = String::from("utilization,method,accepted,total,acceptance_ratio\n");
    for (point, &u) in args.utilizations.iter().enumerate() {
        let mut accepted = vec![0usize; methods.len()];
        for j in 0..args.sets_per_point {
            let seed = args.gen.seed.wrapping_add((point * args.sets_per_point + j) as u64);
            let set = generate_taskset(&args.gen.params(u, seed))?;
            for (k, &method) in methods.iter().enumerate() {
                if analyze(&set, &AnalysisConfig::with_method(method))?.schedulable {
                    accepted[k] += 1;
                }
            }
        }
        for (k, method) in methods.iter().enumerate() {
            let ratio = accepted[k] as f64 / args.sets_per_point as f64;
            csv.push_str(&format!("{u},{method},{},{},{ratio:.4}\n", accepted[k], args.sets_per_point));
        }
    }
    emit(args.out.as_deref(), &csv)
}

fn run_generate(args: &GenerateArgs) -> Result<()> {
    let set = generate_taskset(&args.gen.params(args.utilization, args.gen.seed))?;
    emit(args.out.as_deref(), &to_json(&set))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => io::stdout().write_all(text.as_bytes()).context("cannot write to standard output"),
    }
}
