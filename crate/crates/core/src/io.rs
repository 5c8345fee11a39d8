//! Task-set files.
//!
//! ```json
//! {
//!   "cores": 2,
//!   "tasks": [
//!     {
//!       "deadline": "15",
//!       "edges": [["v1", "v2"]],
//!       "id": "tau2",
//!       "nodes": [{"cmax": "2", "cmin": "2", "id": "v1"}, {"cmax": "3", "cmin": "1", "id": "v2"}],
//!       "period": "20"
//!     }
//!   ]
//! }
//! ```
//!
//! Task order is priority order. Times may be JSON integers or floats, or
//! strings holding an integer, a decimal (`"2.5"`) or a fraction (`"5/2"`);
//! all are read exactly. Output is canonical: sorted keys, times as reduced
//! `p` / `p/q` strings, so equal sets always serialize to equal bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{validate, ModelError, Node, RawTask, TaskSet};
use crate::time::Time;

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("malformed task-set file: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("tasks[{index}]: {source}")]
    InvalidTask { index: usize, source: ModelError },
    #[error("{0}")]
    InvalidSet(ModelError),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTaskSet {
    cores: usize,
    tasks: Vec<FileTask>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTask {
    id: String,
    period: Time,
    deadline: Time,
    nodes: Vec<Node>,
    #[serde(default)]
    edges: Vec<(String, String)>,
}

/// Parses and validates a task set.
pub fn parse_task_set(text: &str) -> Result<TaskSet, FileError> {
    let file: FileTaskSet = serde_json::from_str(text)?;
    let mut tasks = Vec::with_capacity(file.tasks.len());
    for (index, t) in file.tasks.into_iter().enumerate() {
        let raw = RawTask { id: t.id, nodes: t.nodes, edges: t.edges, deadline: t.deadline, period: t.period };
        tasks.push(validate(&raw).map_err(|source| FileError::InvalidTask { index, source })?);
    }
    TaskSet::new(tasks, file.cores).map_err(FileError::InvalidSet)
}

/// Canonical serialization, with a trailing newline.
pub fn to_json(set: &TaskSet) -> String {
    let file = FileTaskSet {
        cores: set.cores(),
        tasks: set
            .tasks()
            .iter()
            .map(|task| {
                let raw = task.to_raw();
                FileTask {
                    id: raw.id,
                    period: raw.period,
                    deadline: raw.deadline,
                    nodes: raw.nodes,
                    edges: raw.edges,
                }
            })
            .collect(),
    };
    // Going through `Value` sorts object keys.
    let value = serde_json::to_value(&file).expect("task sets serialize");
    let mut text = serde_json::to_string_pretty(&value).expect("values serialize");
    text.push('\n');
    text
}

pub fn read_task_set(path: &Path) -> Result<TaskSet, FileError> {
    let text = fs::read_to_string(path).map_err(|source| FileError::Read { path: path.display().to_string(), source })?;
    parse_task_set(&text)
}

pub fn write_task_set(path: &Path, set: &TaskSet) -> Result<(), FileError> {
    fs::write(path, to_json(set)).map_err(|source| FileError::Write { path: path.display().to_string(), source })
}
