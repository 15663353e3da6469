//! Append-only run ledger.
//!
//! A ledger file is JSON Lines: one [`Record`] per line, written and flushed
//! as it happens, so a crash loses at most the record being written and a
//! reader can follow a live run. Everything else here (frames, traces, costs,
//! statistics, replay) is derived from those records.

mod cost;
mod layout;
mod replay;
mod stats;
mod trace;

use std::fs::OpenOptions;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{CheckKind, TaskKind, TokenUsage};
use crate::looper::{LoopConfig, LoopEvent, RunOutcome};
use crate::plan::{DiffCause, NodeStatus, PlanDiff, ProofPlan, StatementId};

pub use cost::{CostModel, Usd};
pub use layout::{depth_layout, LayoutCycle};
pub use replay::{replay, strip_volatile, ReplayError, ReplayReport, VOLATILE_FIELDS};
pub use stats::{aggregate_stats, render_row, RunStats, RunSummary, StatsError};
pub use trace::{export_trace, TraceError, TraceFormat, UnsupportedFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStatus {
    Formalized,
    NotYet,
    Failing,
}

impl FrameStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameStatus::Formalized => "formalized",
            FrameStatus::NotYet => "not_yet",
            FrameStatus::Failing => "failing",
        }
    }
}

impl From<NodeStatus> for FrameStatus {
    fn from(s: NodeStatus) -> Self {
        match s {
            NodeStatus::Closed => FrameStatus::Formalized,
            NodeStatus::Open => FrameStatus::NotYet,
            NodeStatus::Failing => FrameStatus::Failing,
        }
    }
}

/// Snapshot of the plan graph at one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub index: u64,
    pub plan_revision: u64,
    /// In topological order.
    pub node_states: Vec<(StatementId, FrameStatus)>,
    /// `(dependency, dependent)`.
    pub edges: Vec<(StatementId, StatementId)>,
}

impl Frame {
    pub fn of_plan(index: u64, plan: &ProofPlan) -> Self {
        Self {
            index,
            plan_revision: plan.revision(),
            node_states: plan
                .order()
                .iter()
                .filter_map(|id| plan.get(id))
                .map(|n| (n.id.clone(), n.status.into()))
                .collect(),
            edges: plan.edges(),
        }
    }

    pub fn len(&self) -> usize {
        self.node_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_states.is_empty()
    }

    pub fn status_of(&self, id: &StatementId) -> Option<FrameStatus> {
        self.node_states.iter().find(|(n, _)| n == id).map(|(_, s)| *s)
    }

    fn same_graph(&self, other: &Frame) -> bool {
        self.node_states == other.node_states && self.edges == other.edges
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub run_id: String,
    pub started_at: String,
    pub input: String,
    pub workspace: String,
    pub backend: String,
    pub verifier: String,
    pub config: LoopConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub task: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<StatementId>,
    pub usage: TokenUsage,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffRecord {
    pub revision: u64,
    pub cause: DiffCause,
    /// For the initial plan: all nodes, anchor included.
    pub diff: PlanDiff,
    pub invalidated: Vec<StatementId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusRecord {
    pub node: StatementId,
    pub from: NodeStatus,
    pub to: NodeStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub outcome: RunOutcome,
    pub wall_clock_ms: u64,
    pub usage_total: TokenUsage,
    pub statement_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Header(Header),
    Event {
        seq: u64,
        timestamp: String,
        #[serde(flatten)]
        event: LoopEvent,
    },
    Diff(DiffRecord),
    Status(StatusRecord),
    Usage(UsageRecord),
    Frame(Frame),
    Outcome(OutcomeRecord),
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("ledger is closed")]
    Closed,
    #[error("ledger io: {0}")]
    Io(#[from] io::Error),
    #[error("ledger line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// In-memory view of a whole ledger.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunLedger {
    pub records: Vec<Record>,
}

impl RunLedger {
    /// Parses JSON Lines. A final line without a trailing newline that does
    /// not parse is a record still being written and is skipped.
    pub fn parse(text: &str) -> Result<Self, LedgerError> {
        let complete = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        let mut records = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(r) => records.push(r),
                Err(_) if i + 1 == lines.len() && !complete => break,
                Err(source) => return Err(LedgerError::Parse { line: i + 1, source }),
            }
        }
        Ok(Self { records })
    }

    pub fn read(path: &Path) -> Result<Self, LedgerError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn header(&self) -> Option<&Header> {
        self.records.iter().find_map(|r| match r {
            Record::Header(h) => Some(h),
            _ => None,
        })
    }

    pub fn run_id(&self) -> Option<&str> {
        self.header().map(|h| h.run_id.as_str())
    }

    pub fn events(&self) -> impl Iterator<Item = &LoopEvent> {
        self.records.iter().filter_map(|r| match r {
            Record::Event { event, .. } => Some(event),
            _ => None,
        })
    }

    pub fn frames(&self) -> impl Iterator<Item = &Frame> {
        self.records.iter().filter_map(|r| match r {
            Record::Frame(f) => Some(f),
            _ => None,
        })
    }

    pub fn diffs(&self) -> impl Iterator<Item = &DiffRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Diff(d) => Some(d),
            _ => None,
        })
    }

    pub fn usages(&self) -> impl Iterator<Item = &UsageRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Usage(u) => Some(u),
            _ => None,
        })
    }

    pub fn outcome(&self) -> Option<&OutcomeRecord> {
        self.records.iter().rev().find_map(|r| match r {
            Record::Outcome(o) => Some(o),
            _ => None,
        })
    }

    /// Sum of per-invocation usage.
    pub fn usage_sum(&self) -> TokenUsage {
        self.usages().map(|u| u.usage).sum()
    }

    pub fn wall_clock(&self) -> Option<Duration> {
        self.outcome().map(|o| Duration::from_millis(o.wall_clock_ms))
    }

    /// Plan size at every frame, in order.
    pub fn plan_sizes(&self) -> Vec<usize> {
        self.frames().map(Frame::len).collect()
    }
}

/// Appends records to a sink and keeps them in memory.
pub struct LedgerWriter {
    sink: Option<Box<dyn Write + Send>>,
    ledger: RunLedger,
    seq: u64,
    last_frame: Option<Frame>,
    frame_count: u64,
    closed: bool,
}

impl LedgerWriter {
    /// Creates (truncating) a ledger file.
    pub fn create(path: &Path) -> Result<Self, LedgerError> {
        let f = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        Ok(Self::with_sink(Some(Box::new(BufWriter::new(f)))))
    }

    pub fn in_memory() -> Self {
        Self::with_sink(None)
    }

    pub fn with_sink(sink: Option<Box<dyn Write + Send>>) -> Self {
        Self {
            sink,
            ledger: RunLedger::default(),
            seq: 0,
            last_frame: None,
            frame_count: 0,
            closed: false,
        }
    }

    pub fn append(&mut self, record: Record) -> Result<(), LedgerError> {
        if self.closed {
            return Err(LedgerError::Closed);
        }
        if let Some(sink) = self.sink.as_mut() {
            let mut line = serde_json::to_string(&record).expect("records serialize");
            line.push('\n');
            sink.write_all(line.as_bytes())?;
            sink.flush()?;
        }
        self.ledger.records.push(record);
        Ok(())
    }

    pub fn record_event(&mut self, event: LoopEvent) -> Result<(), LedgerError> {
        let seq = self.seq;
        self.seq += 1;
        self.append(Record::Event {
            seq,
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            event,
        })
    }

    /// Records a frame if the plan's statuses or edges differ from the last
    /// frame. Returns the frame index when one was written.
    pub fn snapshot_frame(&mut self, plan: &ProofPlan) -> Result<Option<u64>, LedgerError> {
        let frame = Frame::of_plan(self.frame_count, plan);
        if self.last_frame.as_ref().is_some_and(|f| f.same_graph(&frame)) {
            return Ok(None);
        }
        let index = frame.index;
        self.append(Record::Frame(frame.clone()))?;
        self.last_frame = Some(frame);
        self.frame_count += 1;
        Ok(Some(index))
    }

    pub fn frame_count(&self) -> u64 {
        self.frame_count
    }

    pub fn ledger(&self) -> &RunLedger {
        &self.ledger
    }

    /// Flushes and refuses further records.
    pub fn close(&mut self) -> Result<RunLedger, LedgerError> {
        if let Some(sink) = self.sink.as_mut() {
            sink.flush()?;
        }
        self.closed = true;
        Ok(self.ledger.clone())
    }
}
