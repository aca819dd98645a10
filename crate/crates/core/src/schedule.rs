//! Schedules, their validation and their on-disk forms (CSV and JSON).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Platform, TaskGraph, TaskId};

/// Slack allowed when comparing times that went through decimal text.
const TIME_TOL: f64 = 1e-9;

fn close_or_after(later: f64, earlier: f64) -> bool {
    later >= earlier - TIME_TOL * earlier.abs().max(1.0)
}

/// Where and when one task runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    #[serde(rename = "type")]
    pub ty: usize,
    pub machine: usize,
    pub start: f64,
    pub finish: f64,
}

/// Placements keyed by task id; iteration is in ascending id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schedule {
    placements: BTreeMap<TaskId, Placement>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("schedule is empty")]
    EmptySchedule,
    #[error("task {0} is not scheduled")]
    MissingTask(TaskId),
    #[error("scheduled task {0} is not in the graph")]
    UnknownTask(TaskId),
    #[error("task {task} runs on forbidden type {ty}")]
    ForbiddenType { task: TaskId, ty: usize },
    #[error("task {task} uses machine {machine} of type {ty} which has {available}")]
    MachineOutOfRange { task: TaskId, ty: usize, machine: usize, available: usize },
    #[error("task {task} lasts {actual}, expected {expected}")]
    WrongDuration { task: TaskId, expected: f64, actual: f64 },
    #[error("tasks {first} and {second} overlap on machine {machine} of type {ty}")]
    Overlap { first: TaskId, second: TaskId, ty: usize, machine: usize },
    #[error("task {succ} starts at {start} before predecessor {pred} finishes at {finish}")]
    PrecedenceViolation { pred: TaskId, succ: TaskId, finish: f64, start: f64 },
}

impl ScheduleError {
    pub fn code(&self) -> &'static str {
        match self {
            ScheduleError::EmptySchedule => "EmptySchedule",
            ScheduleError::MissingTask(_) => "MissingTask",
            ScheduleError::UnknownTask(_) => "UnknownTask",
            ScheduleError::ForbiddenType { .. } => "ForbiddenType",
            ScheduleError::MachineOutOfRange { .. } => "MachineOutOfRange",
            ScheduleError::WrongDuration { .. } => "WrongDuration",
            ScheduleError::Overlap { .. } => "Overlap",
            ScheduleError::PrecedenceViolation { .. } => "PrecedenceViolation",
        }
    }
}

impl Schedule {
    pub fn new() -> Self {
        Schedule::default()
    }

    pub fn insert(&mut self, task: TaskId, placement: Placement) {
        self.placements.insert(task, placement);
    }

    pub fn get(&self, task: TaskId) -> Option<&Placement> {
        self.placements.get(&task)
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TaskId, &Placement)> {
        self.placements.iter().map(|(&id, p)| (id, p))
    }

    /// C_max: the latest finish time.
    pub fn makespan(&self) -> Result<f64, ScheduleError> {
        self.placements
            .values()
            .map(|p| p.finish)
            .reduce(f64::max)
            .ok_or(ScheduleError::EmptySchedule)
    }

    /// Makespan with the empty schedule counted as 0.
    pub fn makespan_or_zero(&self) -> f64 {
        self.makespan().unwrap_or(0.0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["task_id", "type", "machine", "start", "finish"])?;
        for (id, p) in self.iter() {
            w.write_record([
                id.to_string(),
                p.ty.to_string(),
                p.machine.to_string(),
                p.start.to_string(),
                p.finish.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, csv::Error> {
        #[derive(Deserialize)]
        struct Row {
            task_id: u64,
            #[serde(rename = "type")]
            ty: usize,
            machine: usize,
            start: f64,
            finish: f64,
        }
        let mut schedule = Schedule::new();
        for row in csv::Reader::from_reader(input).deserialize() {
            let row: Row = row?;
            schedule.insert(
                TaskId(row.task_id),
                Placement { ty: row.ty, machine: row.machine, start: row.start, finish: row.finish },
            );
        }
        Ok(schedule)
    }

    pub fn to_document(&self, platform: &Platform) -> ScheduleDocument {
        ScheduleDocument {
            format: SCHEDULE_FORMAT.to_string(),
            version: 1,
            platform: platform.to_string(),
            makespan: self.makespan_or_zero(),
            placements: self.iter().map(|(task, p)| PlacementRecord { task, placement: *p }).collect(),
        }
    }

    pub fn from_document(doc: &ScheduleDocument) -> Self {
        let mut schedule = Schedule::new();
        for rec in &doc.placements {
            schedule.insert(rec.task, rec.placement);
        }
        schedule
    }
}

pub const SCHEDULE_FORMAT: &str = "hetsched-schedule";

/// Self-describing JSON form of a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDocument {
    pub format: String,
    pub version: u32,
    pub platform: String,
    pub makespan: f64,
    pub placements: Vec<PlacementRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub task: TaskId,
    #[serde(flatten)]
    pub placement: Placement,
}

/// Checks non-preemption, machine ranges, exclusive machines and precedence.
pub fn validate_schedule(s: &Schedule, g: &TaskGraph, platform: &Platform) -> Result<(), ScheduleError> {
    for task in g.tasks() {
        if s.get(task.id).is_none() {
            return Err(ScheduleError::MissingTask(task.id));
        }
    }
    let mut lanes: BTreeMap<(usize, usize), Vec<(f64, f64, TaskId)>> = BTreeMap::new();
    for (id, p) in s.iter() {
        let idx = g.index_of(id).ok_or(ScheduleError::UnknownTask(id))?;
        if p.ty >= platform.num_types() || p.machine >= platform.machines(p.ty) {
            let available = if p.ty < platform.num_types() { platform.machines(p.ty) } else { 0 };
            return Err(ScheduleError::MachineOutOfRange { task: id, ty: p.ty, machine: p.machine, available });
        }
        let Some(expected) = g.task(idx).time(p.ty) else {
            return Err(ScheduleError::ForbiddenType { task: id, ty: p.ty });
        };
        let actual = p.finish - p.start;
        if p.start < 0.0 || (actual - expected).abs() > TIME_TOL * expected.abs().max(p.finish.abs()).max(1.0) {
            return Err(ScheduleError::WrongDuration { task: id, expected, actual });
        }
        lanes.entry((p.ty, p.machine)).or_default().push((p.start, p.finish, id));
    }
    for ((ty, machine), mut lane) in lanes {
        lane.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for w in lane.windows(2) {
            let (_, prev_finish, first) = w[0];
            let (next_start, _, second) = w[1];
            if !close_or_after(next_start, prev_finish) {
                return Err(ScheduleError::Overlap { first, second, ty, machine });
            }
        }
    }
    for &(a, b) in g.edges() {
        let (pa, pb) = (s.get(a).expect("checked"), s.get(b).expect("checked"));
        if !close_or_after(pb.start, pa.finish) {
            return Err(ScheduleError::PrecedenceViolation { pred: a, succ: b, finish: pa.finish, start: pb.start });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Task, CPU, GPU};

    fn place(ty: usize, machine: usize, start: f64, finish: f64) -> Placement {
        Placement { ty, machine, start, finish }
    }

    fn chain() -> TaskGraph {
        TaskGraph::new(2, vec![Task::new(0, &[1.0, 1.0]), Task::new(1, &[1.0, 1.0])], vec![(TaskId(0), TaskId(1))])
            .unwrap()
    }

    #[test]
    fn precedence_violation() {
        let g = chain();
        let p = Platform::hybrid(2, 1).unwrap();
        let mut s = Schedule::new();
        s.insert(TaskId(1), place(CPU, 0, 0.0, 1.0));
        s.insert(TaskId(0), place(CPU, 0, 1.0, 2.0));
        assert_eq!(validate_schedule(&s, &g, &p).unwrap_err().code(), "PrecedenceViolation");
    }

    #[test]
    fn overlap_on_same_machine() {
        let g = TaskGraph::new(2, vec![Task::new(0, &[2.0, 1.0]), Task::new(1, &[2.0, 1.0])], vec![]).unwrap();
        let p = Platform::hybrid(1, 1).unwrap();
        let mut s = Schedule::new();
        s.insert(TaskId(0), place(CPU, 0, 0.0, 2.0));
        s.insert(TaskId(1), place(CPU, 0, 1.0, 3.0));
        assert_eq!(validate_schedule(&s, &g, &p).unwrap_err().code(), "Overlap");
        s.insert(TaskId(1), place(CPU, 0, 2.0, 4.0));
        validate_schedule(&s, &g, &p).unwrap();
    }

    #[test]
    fn other_violations() {
        let g = chain();
        let p = Platform::hybrid(1, 1).unwrap();
        let mut s = Schedule::new();
        s.insert(TaskId(0), place(CPU, 0, 0.0, 1.0));
        assert_eq!(validate_schedule(&s, &g, &p).unwrap_err().code(), "MissingTask");
        s.insert(TaskId(1), place(GPU, 3, 1.0, 2.0));
        assert_eq!(validate_schedule(&s, &g, &p).unwrap_err().code(), "MachineOutOfRange");
        s.insert(TaskId(1), place(GPU, 0, 1.0, 2.5));
        assert_eq!(validate_schedule(&s, &g, &p).unwrap_err().code(), "WrongDuration");
        s.insert(TaskId(1), place(GPU, 0, 1.0, 2.0));
        validate_schedule(&s, &g, &p).unwrap();
        s.insert(TaskId(9), place(GPU, 0, 5.0, 6.0));
        assert_eq!(validate_schedule(&s, &g, &p).unwrap_err().code(), "UnknownTask");
    }

    #[test]
    fn forbidden_type_is_rejected() {
        let g = TaskGraph::new(2, vec![Task::new(0, &[1.0, 1.0]).forbid(GPU)], vec![]).unwrap();
        let mut s = Schedule::new();
        s.insert(TaskId(0), place(GPU, 0, 0.0, 1.0));
        let p = Platform::hybrid(1, 1).unwrap();
        assert_eq!(validate_schedule(&s, &g, &p).unwrap_err().code(), "ForbiddenType");
    }

    #[test]
    fn makespan_examples() {
        let mut s = Schedule::new();
        assert_eq!(s.makespan(), Err(ScheduleError::EmptySchedule));
        s.insert(TaskId(0), place(CPU, 0, 0.0, 5.0));
        assert_eq!(s.makespan(), Ok(5.0));
        let mut s = Schedule::new();
        s.insert(TaskId(0), place(CPU, 0, 0.0, 3.0));
        s.insert(TaskId(1), place(CPU, 1, 2.0, 7.0));
        assert_eq!(s.makespan(), Ok(7.0));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let mut s = Schedule::new();
        s.insert(TaskId(4), place(GPU, 1, 0.1, 0.1 + 1.0 / 3.0));
        s.insert(TaskId(2), place(CPU, 0, 0.0, 2.5));
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("task_id,type,machine,start,finish\n2,0,0,0,2.5\n"));
        assert_eq!(Schedule::read_csv(buf.as_slice()).unwrap(), s);

        let platform = Platform::hybrid(2, 2).unwrap();
        let doc = s.to_document(&platform);
        let json = serde_json::to_string(&doc).unwrap();
        let back: ScheduleDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
        assert_eq!(Schedule::from_document(&back), s);
    }
}
