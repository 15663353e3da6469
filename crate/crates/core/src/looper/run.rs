use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use chrono::Utc;
use log::{debug, info, warn};
use thiserror::Error;

use super::{route_build_result, route_check_verdict, EventKind, LoopConfig, LoopEvent, NextStep, RunInput};
use super::{RunOutcome, StopReason};
use crate::agents::{
    assemble_context, check_context, invoke, AgentBackend, AgentPayload, AgentTask, CheckKind, CheckVerdict,
    ContextExtras, LeanOutcome, LocalContext,
};
use crate::leanenv::{audit_verdict, default_permitted, BuildReport, BuildScope, LockGuard, Verifier};
use crate::leanenv::{VerifierError, Workspace, WorkspaceError};
use crate::ledger::{DiffRecord, Header, LedgerError, LedgerWriter, OutcomeRecord, Record, RunLedger};
use crate::ledger::{StatusRecord, UsageRecord};
use crate::plan::{DiffCause, NodeStatus, PlanDiff, ProofPlan, StatementId};

/// Cooperative cancellation, polled at every transition.
#[derive(Debug, Clone, Default)]
pub struct Cancel {
    flag: Option<Arc<AtomicBool>>,
    stop_file: Option<PathBuf>,
}

impl Cancel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_flag(mut self, flag: Arc<AtomicBool>) -> Self {
        self.flag = Some(flag);
        self
    }

    /// The run stops once this path exists.
    pub fn with_stop_file(mut self, path: impl Into<PathBuf>) -> Self {
        self.stop_file = Some(path.into());
        self
    }

    pub fn is_cancelled(&self) -> bool {
        self.flag.as_ref().is_some_and(|f| f.load(Ordering::SeqCst))
            || self.stop_file.as_ref().is_some_and(|p| p.exists())
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: LoopConfig,
    pub permitted: BTreeSet<String>,
    pub cancel: Cancel,
    pub toolchain_pin: String,
    pub mathlib_rev: Option<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            config: LoopConfig::default(),
            permitted: default_permitted(),
            cancel: Cancel::none(),
            toolchain_pin: "leanprover/lean4:stable".into(),
            mathlib_rev: None,
        }
    }
}

/// Failures that end a run without an outcome.
#[derive(Debug, Error)]
pub enum LoopError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("cannot create workspace directory {path}: {source}")]
    WorkspaceDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

enum Flow {
    Stop(StopReason),
    Fail(LoopError),
}

impl<E: Into<LoopError>> From<E> for Flow {
    fn from(e: E) -> Self {
        Flow::Fail(e.into())
    }
}

struct Loop<'a, B: ?Sized, V: ?Sized> {
    input: &'a RunInput,
    backend: &'a mut B,
    verifier: &'a V,
    opts: &'a RunOptions,
    ws_root: &'a Path,
    ledger: LedgerWriter,
    started: Instant,
    plan: Option<ProofPlan>,
    ws: Option<Workspace>,
    replans: u32,
}

/// Runs the loop on `input` in the workspace at `ws_root` until the target
/// is solved or a stop condition fires. The ledger is written as the run
/// goes; the returned [`RunLedger`] is its in-memory copy.
pub fn run<B, V>(
    input: &RunInput,
    backend: &mut B,
    verifier: &V,
    opts: &RunOptions,
    ws_root: &Path,
    ledger: LedgerWriter,
) -> Result<(RunOutcome, RunLedger), LoopError>
where
    B: AgentBackend + ?Sized,
    V: Verifier + ?Sized,
{
    opts.config.validate().map_err(LoopError::Config)?;
    std::fs::create_dir_all(ws_root).map_err(|source| LoopError::WorkspaceDir {
        path: ws_root.to_owned(),
        source,
    })?;
    let _lock = LockGuard::acquire(ws_root)?;
    let started = Instant::now();
    let mut lp = Loop {
        input,
        backend,
        verifier,
        opts,
        ws_root,
        ledger,
        started,
        plan: None,
        ws: None,
        replans: 0,
    };
    lp.ledger.append(Record::Header(Header {
        run_id: format!("{}-{}", Utc::now().format("%Y%m%dT%H%M%S%.3fZ"), std::process::id()),
        started_at: Utc::now().to_rfc3339(),
        input: input.path.display().to_string(),
        workspace: ws_root.display().to_string(),
        backend: lp.backend.name().into(),
        verifier: verifier.mode().into(),
        config: opts.config.clone(),
    }))?;
    let outcome = match lp.drive() {
        Ok(o) => o,
        Err(Flow::Stop(reason)) => RunOutcome::unfinished(reason, lp.revision()),
        Err(Flow::Fail(e)) => return Err(e),
    };
    info!("run finished: {outcome}");
    let usage_total = lp.ledger.ledger().usage_sum();
    lp.ledger.append(Record::Outcome(OutcomeRecord {
        outcome,
        wall_clock_ms: lp.started.elapsed().as_millis() as u64,
        usage_total,
        statement_count: lp.plan.as_ref().map_or(0, ProofPlan::len),
    }))?;
    let ledger = lp.ledger.close()?;
    Ok((outcome, ledger))
}

impl<B: AgentBackend + ?Sized, V: Verifier + ?Sized> Loop<'_, B, V> {
    fn revision(&self) -> u64 {
        self.plan.as_ref().map_or(0, ProofPlan::revision)
    }

    fn plan(&self) -> &ProofPlan {
        self.plan.as_ref().expect("plan exists after the initial diff")
    }

    fn ws(&mut self) -> &mut Workspace {
        self.ws.as_mut().expect("workspace exists after the initial diff")
    }

    fn event(&mut self, kind: EventKind, node: Option<&StatementId>, detail: impl Into<String>) -> Result<(), Flow> {
        let ev = LoopEvent::new(kind, node, detail);
        debug!("{:?} {:?} {}", ev.kind, ev.node, ev.detail);
        self.ledger.record_event(ev)?;
        Ok(())
    }

    /// Checked before every agent invocation and every build.
    fn gate(&mut self) -> Result<(), Flow> {
        if self.opts.cancel.is_cancelled() {
            self.event(EventKind::RunStopped, None, "cancelled")?;
            return Err(Flow::Stop(StopReason::Cancelled));
        }
        if self.started.elapsed() >= self.opts.config.wall_clock_budget {
            let detail = format!("wall-clock budget of {:?} spent", self.opts.config.wall_clock_budget);
            self.event(EventKind::BudgetStop, None, detail)?;
            return Err(Flow::Stop(StopReason::TimeBudget));
        }
        Ok(())
    }

    fn set_status(&mut self, id: &StatementId, to: NodeStatus) -> Result<(), Flow> {
        let plan = self.plan.as_mut().expect("plan exists");
        let from = plan
            .set_status(id, to)
            .expect("the loop only touches nodes of the current plan");
        if from != to {
            self.ledger.append(Record::Status(StatusRecord {
                node: id.clone(),
                from,
                to,
            }))?;
            self.frame()?;
        }
        Ok(())
    }

    fn frame(&mut self) -> Result<(), Flow> {
        let plan = self.plan.as_ref().expect("plan exists");
        self.ledger.snapshot_frame(plan)?;
        Ok(())
    }

    /// One fresh invocation, repeated on malformed replies up to the retry
    /// limit. Any other agent failure stops the run.
    fn ask(&mut self, task: &AgentTask) -> Result<AgentPayload, Flow> {
        let mut failures = 0;
        loop {
            self.gate()?;
            match invoke(&mut *self.backend, task) {
                Ok(inv) => {
                    self.ledger.append(Record::Usage(UsageRecord {
                        task: task.kind,
                        check: task.check_kind,
                        node: task.subject.node_id.clone(),
                        usage: inv.usage,
                        elapsed_ms: inv.elapsed.as_millis() as u64,
                    }))?;
                    return Ok(inv.payload);
                }
                Err(e) if e.is_retryable() && failures < self.opts.config.check_retry_limit => {
                    failures += 1;
                    warn!("retrying {}: {e}", task.kind.as_str());
                    self.event(EventKind::AgentRetry, task.subject.node_id.as_ref(), e.to_string())?;
                }
                Err(e) => {
                    self.event(EventKind::RunStopped, task.subject.node_id.as_ref(), e.to_string())?;
                    return Err(Flow::Stop(StopReason::BackendFailure));
                }
            }
        }
    }

    /// Asks for a diff until `accept` takes one, counting rejections against
    /// the retry limit.
    fn ask_diff<T>(
        &mut self,
        task: &AgentTask,
        mut accept: impl FnMut(&Self, PlanDiff) -> Result<T, String>,
    ) -> Result<T, Flow> {
        let mut rejections = 0;
        loop {
            let AgentPayload::Diff(diff) = self.ask(task)? else {
                unreachable!("invoke enforces the payload kind")
            };
            match accept(self, diff) {
                Ok(t) => return Ok(t),
                Err(why) if rejections < self.opts.config.check_retry_limit => {
                    rejections += 1;
                    self.event(EventKind::AgentRetry, task.subject.node_id.as_ref(), format!("diff rejected: {why}"))?;
                }
                Err(why) => {
                    self.event(EventKind::RunStopped, task.subject.node_id.as_ref(), format!("diff rejected: {why}"))?;
                    return Err(Flow::Stop(StopReason::BackendFailure));
                }
            }
        }
    }

    fn drive(&mut self) -> Result<RunOutcome, Flow> {
        self.initial_plan()?;
        loop {
            self.gate()?;
            if self.plan().is_complete() {
                if self.success_exit()? {
                    return Ok(RunOutcome::solved(self.revision()));
                }
                continue;
            }
            let id = self
                .plan()
                .next_open_statement()
                .cloned()
                .expect("an acyclic plan with an unfinished node has a ready one");
            self.work_node(&id)?;
        }
    }

    fn initial_plan(&mut self) -> Result<(), Flow> {
        let anchor = &self.input.anchor;
        let task = AgentTask::plan_initial(LocalContext {
            statement: format!("Prove `{}` without changing its statement.", anchor.decl_name),
            anchor_signature: Some(anchor.signature.clone()),
            lean_source: Some(self.input.source.clone()),
            ..LocalContext::default()
        });
        let plan = self.ask_diff(&task, |lp, diff| lp.initial_nodes(diff))?;
        let target = plan.anchor_node().id.clone();
        let ws = Workspace::create(
            self.ws_root,
            target,
            self.input.anchor.clone(),
            self.opts.toolchain_pin.clone(),
            self.opts.mathlib_rev.clone(),
        )?;
        self.ws = Some(ws);
        let mut recorded = PlanDiff::new(DiffCause::InitialPlan);
        recorded.adds = plan.nodes().to_vec();
        self.ledger.append(Record::Diff(DiffRecord {
            revision: plan.revision(),
            cause: DiffCause::InitialPlan,
            diff: recorded,
            invalidated: Vec::new(),
        }))?;
        let detail = format!("{} statements, target `{}`", plan.len(), plan.anchor_node().id);
        self.plan = Some(plan);
        self.event(EventKind::PlanCreated, None, detail)?;
        self.frame()
    }

    /// The initial diff may only add. The anchor is the node the planner
    /// marked, else the unique node nothing depends on; it gets the anchor
    /// taken from the input file either way.
    fn initial_nodes(&self, diff: PlanDiff) -> Result<ProofPlan, String> {
        if !diff.removes.is_empty() || !diff.rewrites.is_empty() {
            return Err("an initial plan can only add statements".into());
        }
        let mut nodes = diff.adds;
        let marked: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].anchor.is_some()).collect();
        let target = match marked.as_slice() {
            [i] => *i,
            [] => {
                let used: BTreeSet<&StatementId> = nodes.iter().flat_map(|n| &n.deps).collect();
                let sinks: Vec<usize> = (0..nodes.len()).filter(|&i| !used.contains(&nodes[i].id)).collect();
                match sinks.as_slice() {
                    [i] => *i,
                    _ => return Err(format!("cannot tell the target among {} final statements", sinks.len())),
                }
            }
            _ => return Err(format!("{} statements are marked as the target", marked.len())),
        };
        for (i, n) in nodes.iter_mut().enumerate() {
            n.status = NodeStatus::Open;
            n.anchor = (i == target).then(|| self.input.anchor.clone());
        }
        ProofPlan::create(nodes).map_err(|e| e.to_string())
    }

    /// Lean work on one node until it closes or a replan happens.
    fn work_node(&mut self, id: &StatementId) -> Result<(), Flow> {
        let mut errors: Option<String> = None;
        loop {
            let (outcome, report) = self.lean_step(id, errors.take())?;
            errors = report.error_text();
            let mut next = route_build_result(&report, outcome.exhausted);
            loop {
                match next {
                    NextStep::Check(kind) => {
                        let verdict = self.check(id, kind, &outcome.source, errors.clone())?;
                        next = route_check_verdict(kind, &verdict);
                    }
                    NextStep::CloseAndSelectNext => {
                        self.event(EventKind::NodeClosed, Some(id), "")?;
                        return self.set_status(id, NodeStatus::Closed);
                    }
                    NextStep::RetrySameNode => break,
                    NextStep::Replan(cause) => {
                        return self.replan(id, cause, Some(outcome.source.clone()), errors);
                    }
                }
            }
        }
    }

    /// Drafts and builds until the node compiles or the compile budget runs
    /// out. Sorries do not stop a draft from counting as compiled.
    fn lean_step(&mut self, id: &StatementId, errors: Option<String>) -> Result<(LeanOutcome, BuildReport), Flow> {
        let budget = self.opts.config.compile_budget;
        let mut source = self.ws().read_node(id)?;
        if source.is_none() && self.plan().anchor_node().id == *id {
            source = Some(self.input.source.clone());
        }
        let mut last_errors = errors;
        let mut report = BuildReport::clean();
        for attempt in 1..=budget {
            let ctx = assemble_context(
                self.plan(),
                id,
                ContextExtras {
                    lean_source: source.clone(),
                    build_errors: last_errors.clone(),
                },
            )
            .expect("selected node is in the plan");
            let AgentPayload::Lean(draft) = self.ask(&AgentTask::lean_work(ctx))? else {
                unreachable!("invoke enforces the payload kind")
            };
            self.event(EventKind::LeanAttempt, Some(id), format!("attempt {attempt}/{budget}"))?;
            self.ws().write_node(id, &draft.source)?;
            source = Some(draft.source);
            self.gate()?;
            report = self.build(id)?;
            if report.compiles() {
                let (kind, detail) = if report.clean {
                    (EventKind::BuildClean, String::new())
                } else {
                    (EventKind::BuildSorries, format!("{} sorry site(s)", report.sorry_sites.len()))
                };
                self.event(kind, Some(id), detail)?;
                let outcome = LeanOutcome {
                    source: source.unwrap_or_default(),
                    exhausted: false,
                    attempts_used: attempt,
                };
                return Ok((outcome, report));
            }
            last_errors = report.error_text();
        }
        self.event(EventKind::NodeFailing, Some(id), format!("compile budget of {budget} exhausted"))?;
        self.set_status(id, NodeStatus::Failing)?;
        let outcome = LeanOutcome {
            source: source.unwrap_or_default(),
            exhausted: true,
            attempts_used: budget,
        };
        Ok((outcome, report))
    }

    /// A timed-out build counts as a failed attempt; other verifier errors
    /// end the run.
    fn build(&mut self, id: &StatementId) -> Result<BuildReport, Flow> {
        let ws = self.ws.as_ref().expect("workspace exists");
        match self.verifier.build(ws, &BuildScope::Node(id.clone())) {
            Ok(r) => Ok(r),
            Err(VerifierError::BuildTimeout(d)) => Ok(BuildReport {
                clean: false,
                sorry_sites: Vec::new(),
                errors: vec![format!("build timed out after {d:?}")],
                diagnostics: String::new(),
                elapsed_ms: d.as_millis() as u64,
            }),
            Err(e) => Err(e.into()),
        }
    }

    fn check(
        &mut self,
        id: &StatementId,
        kind: CheckKind,
        source: &str,
        errors: Option<String>,
    ) -> Result<CheckVerdict, Flow> {
        let ctx = check_context(self.plan(), id, kind, source.to_owned(), errors).expect("selected node is in the plan");
        let AgentPayload::Verdict(v) = self.ask(&AgentTask::check(kind, ctx))? else {
            unreachable!("invoke enforces the payload kind")
        };
        let ev = if v.pass { EventKind::CheckPass } else { EventKind::CheckFail };
        let detail = if v.note.is_empty() {
            kind.as_str().to_owned()
        } else {
            format!("{kind}: {}", v.note)
        };
        self.event(ev, Some(id), detail)?;
        Ok(v)
    }

    /// Asks the planner for a diff, applies it, and restarts selection from
    /// the top of the new order.
    fn replan(
        &mut self,
        id: &StatementId,
        cause: DiffCause,
        lean_source: Option<String>,
        build_errors: Option<String>,
    ) -> Result<(), Flow> {
        let limit = self.opts.config.replan_limit;
        if self.replans >= limit {
            self.event(EventKind::BudgetStop, Some(id), format!("replan limit of {limit} reached"))?;
            return Err(Flow::Stop(StopReason::ReplanLimit));
        }
        let ctx = assemble_context(
            self.plan(),
            id,
            ContextExtras {
                lean_source,
                build_errors,
            },
        )
        .expect("replanned node is in the plan");
        let task = AgentTask::plan_revise(ctx, cause);
        let (diff, applied) = self.ask_diff(&task, |lp, mut diff| {
            diff.cause = cause;
            let applied = lp.plan().apply_diff(&diff).map_err(|e| e.to_string())?;
            Ok((diff, applied))
        })?;
        let summary = format!(
            "revision {} ({}): +{} -{} ~{}, {} invalidated",
            applied.plan.revision(),
            cause.as_str(),
            diff.adds.len(),
            diff.removes.len(),
            diff.rewrites.len(),
            applied.invalidated.len()
        );
        self.ledger.append(Record::Diff(DiffRecord {
            revision: applied.plan.revision(),
            cause,
            invalidated: applied.invalidated.iter().cloned().collect(),
            diff: diff.clone(),
        }))?;
        for removed in &diff.removes {
            self.ws().remove_node(removed)?;
        }
        self.plan = Some(applied.plan);
        self.replans += 1;
        self.event(EventKind::DiffApplied, Some(id), summary)?;
        self.frame()?;
        self.event(EventKind::Restart, None, format!("replan {}/{limit}", self.replans))
    }

    /// Full build plus audit. On failure with replans left, the target is
    /// reopened and replanned as a faithfulness failure.
    fn success_exit(&mut self) -> Result<bool, Flow> {
        let ws = self.ws.as_ref().expect("workspace exists");
        let anchor = self.input.anchor.clone();
        let report = match self.verifier.build(ws, &BuildScope::All) {
            Ok(r) => r,
            Err(VerifierError::BuildTimeout(d)) => BuildReport {
                clean: false,
                sorry_sites: Vec::new(),
                errors: vec![format!("build timed out after {d:?}")],
                diagnostics: String::new(),
                elapsed_ms: 0,
            },
            Err(e) => return Err(e.into()),
        };
        let audit = audit_verdict(ws, &anchor, self.verifier, &self.opts.permitted);
        let target = self.plan().anchor_node().id.clone();
        if audit.pass && report.clean {
            let axioms: Vec<&str> = audit.axioms_used.iter().map(String::as_str).collect();
            self.event(
                EventKind::SuccessExit,
                Some(&target),
                format!("audit pass; axioms: [{}]", axioms.join(", ")),
            )?;
            return Ok(true);
        }
        let mut details = audit.details;
        if !report.clean {
            details.insert(0, "full build is not clean".into());
            details.extend(report.error_text());
        }
        let details = details.join("; ");
        self.event(EventKind::AuditFail, Some(&target), details.clone())?;
        if self.replans >= self.opts.config.replan_limit {
            return Err(Flow::Stop(StopReason::AuditFail));
        }
        let source = self.ws().read_node(&target)?;
        self.set_status(&target, NodeStatus::Open)?;
        self.replan(&target, DiffCause::FaithfulnessFail, source, Some(details))?;
        Ok(false)
    }
}
