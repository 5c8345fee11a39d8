pub mod gen;
pub mod graph;
pub mod io;
pub mod model;
pub mod rta;
pub mod sim;
pub mod time;
pub mod workload;

pub use graph::{timing_profile, NodePath, TimingProfile};
pub use model::{validate, DagTask, ModelError, Node, RawTask, TaskSet};
pub use rta::{analyze, AnalysisConfig, AnalysisReport, Method, Verdict};
pub use time::Time;
pub use workload::{LLTask, WorkloadContext};
