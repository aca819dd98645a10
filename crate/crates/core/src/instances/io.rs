use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, Task, TaskGraph, TaskId};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parse error at line {line}, column {column}: {reason}")]
    Parse { line: usize, column: usize, reason: String },
    #[error(transparent)]
    Invalid(#[from] GraphError),
}

impl IoError {
    pub fn code(&self) -> &'static str {
        match self {
            IoError::Io { .. } => "IoError",
            IoError::Parse { .. } => "ParseError",
            IoError::Invalid(e) => e.code(),
        }
    }
}

const FORBIDDEN: f64 = -1.0;

/// On-disk shape of a task graph. A processing time of `-1` marks a
/// forbidden type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub q: usize,
    pub tasks: Vec<TaskRecord>,
    pub edges: Vec<[u64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub p: Vec<f64>,
}

impl From<&TaskGraph> for GraphFile {
    fn from(g: &TaskGraph) -> Self {
        GraphFile {
            q: g.num_types(),
            tasks: g
                .tasks()
                .iter()
                .map(|t| TaskRecord {
                    id: t.id.0,
                    label: t.label.clone(),
                    p: t.times().iter().map(|p| p.unwrap_or(FORBIDDEN)).collect(),
                })
                .collect(),
            edges: g.edges().iter().map(|&(a, b)| [a.0, b.0]).collect(),
        }
    }
}

impl TryFrom<GraphFile> for TaskGraph {
    type Error = GraphError;

    fn try_from(file: GraphFile) -> Result<Self, GraphError> {
        let tasks = file
            .tasks
            .into_iter()
            .map(|r| {
                let times = r.p.into_iter().map(|p| if p == FORBIDDEN { None } else { Some(p) }).collect();
                let task = Task::from_options(r.id, times);
                match r.label {
                    Some(l) => task.with_label(l),
                    None => task,
                }
            })
            .collect();
        let edges = file.edges.into_iter().map(|[a, b]| (TaskId(a), TaskId(b))).collect();
        TaskGraph::new(file.q, tasks, edges)
    }
}

/// Serializes to one line of JSON followed by a newline.
pub fn graph_to_json(g: &TaskGraph) -> String {
    let mut s = serde_json::to_string(&GraphFile::from(g)).expect("graph file serializes");
    s.push('\n');
    s
}

pub fn graph_from_json(text: &str) -> Result<TaskGraph, IoError> {
    let file: GraphFile = serde_json::from_str(text)
        .map_err(|e| IoError::Parse { line: e.line(), column: e.column(), reason: e.to_string() })?;
    Ok(TaskGraph::try_from(file)?)
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<TaskGraph, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IoError::Io { path: path.to_owned(), source })?;
    graph_from_json(&text)
}

pub fn write_graph(g: &TaskGraph, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, graph_to_json(g)).map_err(|source| IoError::Io { path: path.to_owned(), source })
}

/// Writes the graph and a `<path>.meta.json` sidecar holding `meta`.
pub fn write_graph_with_meta(g: &TaskGraph, path: impl AsRef<Path>, meta: &serde_json::Value) -> Result<PathBuf, IoError> {
    let path = path.as_ref();
    write_graph(g, path)?;
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".meta.json");
    let sidecar = PathBuf::from(sidecar);
    let mut text = serde_json::to_string_pretty(meta).expect("json value serializes");
    text.push('\n');
    fs::write(&sidecar, text).map_err(|source| IoError::Io { path: sidecar.clone(), source })?;
    Ok(sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GPU;

    #[test]
    fn forbidden_marker() {
        let g = graph_from_json(r#"{"q":2,"tasks":[{"id":1,"p":[3.5,-1]}],"edges":[]}"#).unwrap();
        assert!(!g.task(0).is_allowed(GPU));
        assert!(graph_to_json(&g).contains("[3.5,-1.0]"));
    }

    #[test]
    fn truncated_input_is_positioned() {
        let err = graph_from_json("{\"q\":2,\n\"tasks\":[{\"id\":1,").unwrap_err();
        match err {
            IoError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(graph_from_json("").unwrap_err().code(), "ParseError");
    }

    #[test]
    fn invalid_graph_is_reported() {
        let err = graph_from_json(r#"{"q":2,"tasks":[{"id":1,"p":[1,1]},{"id":2,"p":[1,1]}],"edges":[[1,2],[2,1]]}"#)
            .unwrap_err();
        assert_eq!(err.code(), "CycleDetected");
        let err = graph_from_json(r#"{"q":2,"tasks":[{"id":1,"p":[1,-2]}],"edges":[]}"#).unwrap_err();
        assert_eq!(err.code(), "NegativeTime");
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let tasks = vec![
            Task::new(3, &[0.1 + 0.2, 1e-300]).with_label("a"),
            Task::new(7, &[std::f64::consts::PI, 2.0 / 3.0]),
        ];
        let g = TaskGraph::new(2, tasks, vec![(TaskId(3), TaskId(7))]).unwrap();
        let text = graph_to_json(&g);
        let back = graph_from_json(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(graph_to_json(&back), text);
    }
}
