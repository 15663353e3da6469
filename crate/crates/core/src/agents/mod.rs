//! Agent invocations.
//!
//! Every call to an agent carries exactly one objective ([`AgentTask`]) and
//! the smallest context that objective needs ([`LocalContext`]). Backends are
//! stateless per call: the scripted backend replays a fixture, the live one
//! sends one independent request per attempt.

mod live;
mod scripted;
mod templates;

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::{DiffCause, PlanDiff, ProofPlan, StatementId};

pub use live::{
    extract_payload, HttpResponse, LiveBackend, LiveConfig, RetryPolicy, Transport, TransportError, UreqTransport,
    API_KEY_ENV, PAYLOAD_BEGIN, PAYLOAD_END,
};
pub use scripted::{Fixture, FixtureEntry, ScriptedBackend};
pub use templates::{PromptTemplates, TemplateError, PLACEHOLDERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    PlanInitial,
    PlanRevise,
    LeanWork,
    Check,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::PlanInitial => "plan_initial",
            TaskKind::PlanRevise => "plan_revise",
            TaskKind::LeanWork => "lean_work",
            TaskKind::Check => "check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Math,
    Decomposition,
    Faithfulness,
}

impl CheckKind {
    pub const ALL: [CheckKind; 3] = [CheckKind::Math, CheckKind::Decomposition, CheckKind::Faithfulness];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckKind::Math => "math",
            CheckKind::Decomposition => "decomposition",
            CheckKind::Faithfulness => "faithfulness",
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What an agent may see.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalContext {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_id: Option<StatementId>,
    pub statement: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub sketch: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dep_statements: Vec<(StatementId, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_signature: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lean_source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build_errors: Option<String>,
}

/// Optional material attached to a context.
#[derive(Debug, Clone, Default)]
pub struct ContextExtras {
    pub lean_source: Option<String>,
    pub build_errors: Option<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown node `{0}`")]
pub struct UnknownNode(pub StatementId);

/// Statement and sketch of `node_id`, the statements of its direct
/// dependencies, the anchor signature iff it is the target, and `extras`.
pub fn assemble_context(
    plan: &ProofPlan,
    node_id: &StatementId,
    extras: ContextExtras,
) -> Result<LocalContext, UnknownNode> {
    let node = plan.get(node_id).ok_or_else(|| UnknownNode(node_id.clone()))?;
    let dep_statements = node
        .deps
        .iter()
        .filter_map(|d| plan.get(d))
        .map(|d| (d.id.clone(), d.informal.clone()))
        .collect();
    Ok(LocalContext {
        node_id: Some(node.id.clone()),
        statement: node.informal.clone(),
        sketch: node.sketch.clone(),
        dep_statements,
        anchor_signature: node.anchor.as_ref().map(|a| a.signature.clone()),
        lean_source: extras.lean_source,
        build_errors: extras.build_errors,
    })
}

/// Context for a check. Faithfulness sees only the statement (plus the
/// anchor signature for the target) and the produced source; Math and
/// Decomposition additionally get the sketch, dependency statements and the
/// latest build errors.
pub fn check_context(
    plan: &ProofPlan,
    node_id: &StatementId,
    kind: CheckKind,
    lean_source: String,
    build_errors: Option<String>,
) -> Result<LocalContext, UnknownNode> {
    let full = assemble_context(
        plan,
        node_id,
        ContextExtras {
            lean_source: Some(lean_source),
            build_errors,
        },
    )?;
    Ok(match kind {
        CheckKind::Faithfulness => LocalContext {
            node_id: full.node_id,
            statement: full.statement,
            anchor_signature: full.anchor_signature,
            lean_source: full.lean_source,
            ..LocalContext::default()
        },
        CheckKind::Math | CheckKind::Decomposition => full,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTask {
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_kind: Option<CheckKind>,
    pub subject: LocalContext,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<DiffCause>,
}

impl AgentTask {
    pub fn plan_initial(subject: LocalContext) -> Self {
        Self {
            kind: TaskKind::PlanInitial,
            check_kind: None,
            subject,
            cause: Some(DiffCause::InitialPlan),
        }
    }

    pub fn plan_revise(subject: LocalContext, cause: DiffCause) -> Self {
        Self {
            kind: TaskKind::PlanRevise,
            check_kind: None,
            subject,
            cause: Some(cause),
        }
    }

    pub fn lean_work(subject: LocalContext) -> Self {
        Self {
            kind: TaskKind::LeanWork,
            check_kind: None,
            subject,
            cause: None,
        }
    }

    pub fn check(kind: CheckKind, subject: LocalContext) -> Self {
        Self {
            kind: TaskKind::Check,
            check_kind: Some(kind),
            subject,
            cause: None,
        }
    }

    /// One objective: checks name exactly one check kind, nothing else does.
    pub fn is_well_formed(&self) -> bool {
        (self.kind == TaskKind::Check) == self.check_kind.is_some()
            && (self.kind != TaskKind::PlanRevise || self.cause.is_some_and(|c| c != DiffCause::InitialPlan))
    }
}

/// One Lean Agent attempt: the full file for the node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeanDraft {
    pub source: String,
}

/// Result of a whole Lean work step (several drafts against one budget).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeanOutcome {
    pub source: String,
    pub exhausted: bool,
    pub attempts_used: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub pass: bool,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentPayload {
    Diff(PlanDiff),
    Lean(LeanDraft),
    Verdict(CheckVerdict),
}

impl AgentPayload {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AgentPayload::Diff(_) => "diff",
            AgentPayload::Lean(_) => "lean",
            AgentPayload::Verdict(_) => "verdict",
        }
    }

    pub fn matches(&self, kind: TaskKind) -> bool {
        matches!(
            (self, kind),
            (AgentPayload::Diff(_), TaskKind::PlanInitial | TaskKind::PlanRevise)
                | (AgentPayload::Lean(_), TaskKind::LeanWork)
                | (AgentPayload::Verdict(_), TaskKind::Check)
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenUsage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
    #[serde(default)]
    pub cache_read_tokens: u64,
    #[serde(default)]
    pub cache_write_tokens: u64,
}

impl TokenUsage {
    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }
}

impl Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, o: TokenUsage) -> TokenUsage {
        TokenUsage {
            prompt_tokens: self.prompt_tokens + o.prompt_tokens,
            completion_tokens: self.completion_tokens + o.completion_tokens,
            cache_read_tokens: self.cache_read_tokens + o.cache_read_tokens,
            cache_write_tokens: self.cache_write_tokens + o.cache_write_tokens,
        }
    }
}

impl AddAssign for TokenUsage {
    fn add_assign(&mut self, o: TokenUsage) {
        *self = *self + o;
    }
}

impl Sum for TokenUsage {
    fn sum<I: Iterator<Item = TokenUsage>>(iter: I) -> Self {
        iter.fold(TokenUsage::default(), Add::add)
    }
}

/// Fixture lookup key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskKey {
    pub kind: TaskKind,
    pub check: Option<CheckKind>,
    pub node: Option<StatementId>,
    pub occurrence: u32,
}

impl fmt::Display for TaskKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.as_str())?;
        if let Some(c) = self.check {
            write!(f, "/{c}")?;
        }
        if let Some(n) = &self.node {
            write!(f, " on `{n}`")?;
        }
        write!(f, " #{}", self.occurrence)
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("backend unavailable after {attempts} attempt(s): {last}")]
    BackendUnavailable { attempts: u32, last: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("authentication: {0}")]
    Auth(String),
    #[error("no fixture entry for {0}")]
    FixtureMiss(TaskKey),
    #[error("fixture: {0}")]
    FixtureParse(String),
    #[error("ill-formed task: {0}")]
    IllFormedTask(String),
    #[error("backend returned a {got} payload for a {expected} task")]
    KindMismatch { expected: &'static str, got: &'static str },
}

impl AgentError {
    /// Errors the loop may answer with a fresh invocation.
    pub fn is_retryable(&self) -> bool {
        matches!(self, AgentError::MalformedResponse(_) | AgentError::KindMismatch { .. })
    }
}

/// Raw backend reply before envelope checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendReply {
    pub payload: AgentPayload,
    pub usage: TokenUsage,
}

pub trait AgentBackend {
    fn name(&self) -> &'static str;

    /// Answers one task with a fresh session.
    fn respond(&mut self, task: &AgentTask) -> Result<BackendReply, AgentError>;
}

impl<B: AgentBackend + ?Sized> AgentBackend for Box<B> {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn respond(&mut self, task: &AgentTask) -> Result<BackendReply, AgentError> {
        (**self).respond(task)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub payload: AgentPayload,
    pub usage: TokenUsage,
    pub elapsed: Duration,
}

/// Runs one task and enforces that the payload kind matches the task kind.
pub fn invoke<B: AgentBackend + ?Sized>(backend: &mut B, task: &AgentTask) -> Result<Invocation, AgentError> {
    if !task.is_well_formed() {
        return Err(AgentError::IllFormedTask(format!(
            "{} with check kind {:?} and cause {:?}",
            task.kind.as_str(),
            task.check_kind,
            task.cause
        )));
    }
    let started = Instant::now();
    let reply = backend.respond(task)?;
    if !reply.payload.matches(task.kind) {
        return Err(AgentError::KindMismatch {
            expected: task.kind.as_str(),
            got: reply.payload.kind_name(),
        });
    }
    Ok(Invocation {
        payload: reply.payload,
        usage: reply.usage,
        elapsed: started.elapsed(),
    })
}
