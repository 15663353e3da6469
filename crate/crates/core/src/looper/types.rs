use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::agents::CheckKind;
use crate::plan::{DiffCause, StatementId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopConfig {
    #[serde(with = "duration_ms")]
    pub wall_clock_budget: Duration,
    /// Lean drafts per work step before the node counts as exhausted.
    pub compile_budget: u32,
    /// Accepted replans before the run gives up.
    pub replan_limit: u32,
    /// Fresh re-invocations after a malformed reply or a rejected diff.
    pub check_retry_limit: u32,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            wall_clock_budget: Duration::from_secs(4 * 3600),
            compile_budget: 8,
            replan_limit: 64,
            check_retry_limit: 2,
        }
    }
}

impl LoopConfig {
    /// Budgets are counts of things that must be allowed to happen at least
    /// once. The wall-clock budget may be zero (stop before doing anything).
    pub fn validate(&self) -> Result<(), String> {
        if self.compile_budget == 0 {
            return Err("compile budget must be positive".into());
        }
        if self.replan_limit == 0 {
            return Err("replan limit must be positive".into());
        }
        if self.check_retry_limit == 0 {
            return Err("check retry limit must be positive".into());
        }
        Ok(())
    }
}

pub(crate) mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Solved,
    Unfinished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TimeBudget,
    ReplanLimit,
    BackendFailure,
    AuditFail,
    /// Stop file or signal.
    Cancelled,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::TimeBudget => "time_budget",
            StopReason::ReplanLimit => "replan_limit",
            StopReason::BackendFailure => "backend_failure",
            StopReason::AuditFail => "audit_fail",
            StopReason::Cancelled => "cancelled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<StopReason>,
    pub final_plan_revision: u64,
}

impl RunOutcome {
    pub fn solved(rev: u64) -> Self {
        Self {
            verdict: Verdict::Solved,
            reason: None,
            final_plan_revision: rev,
        }
    }

    pub fn unfinished(reason: StopReason, rev: u64) -> Self {
        Self {
            verdict: Verdict::Unfinished,
            reason: Some(reason),
            final_plan_revision: rev,
        }
    }

    pub fn is_solved(&self) -> bool {
        self.verdict == Verdict::Solved
    }
}

impl fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.verdict, self.reason) {
            (Verdict::Solved, _) => f.write_str("solved"),
            (Verdict::Unfinished, Some(r)) => write!(f, "unfinished ({})", r.as_str()),
            (Verdict::Unfinished, None) => f.write_str("unfinished"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PlanCreated,
    DiffApplied,
    LeanAttempt,
    BuildClean,
    BuildSorries,
    CheckPass,
    CheckFail,
    NodeClosed,
    NodeFailing,
    Restart,
    SuccessExit,
    AuditFail,
    BudgetStop,
    /// A reply the loop could not use (malformed payload, rejected diff).
    AgentRetry,
    RunStopped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopEvent {
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<StatementId>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl LoopEvent {
    pub fn new(kind: EventKind, node: Option<&StatementId>, detail: impl Into<String>) -> Self {
        Self {
            kind,
            node: node.cloned(),
            detail: detail.into(),
        }
    }
}

/// What the loop does next after a build or a check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextStep {
    Check(CheckKind),
    /// Faithfulness passed: close the node and pick the next one.
    CloseAndSelectNext,
    RetrySameNode,
    Replan(DiffCause),
}
