use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use proofloop::agents::{
    AgentBackend, AgentError, Fixture, LiveBackend, LiveConfig, PromptTemplates, ScriptedBackend, UreqTransport,
};
use proofloop::leanenv::{
    audit_verdict, LakeVerifier, SimRules, SimVerifier, Verifier, VerifierError, Workspace, WorkspaceError,
};
use proofloop::ledger::{
    aggregate_stats, export_trace, render_row, replay, LedgerError, LedgerWriter, RunLedger, RunSummary,
    TraceFormat,
};
use proofloop::looper::{load_input, run, Cancel, LoopError, RunOptions};

use crate::config::{BackendKind, ConfigError, Settings, VerifierKind};

/// Everything that ends a command early. The variant picks the exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, missing or malformed inputs.
    #[error("{0}")]
    Input(String),
    /// Missing toolchain, missing credentials, locked or unwritable paths.
    #[error("{0}")]
    Environment(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Environment(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn verifier_error(e: VerifierError) -> CliError {
    CliError::Environment(e.to_string())
}

fn workspace_error(e: WorkspaceError) -> CliError {
    CliError::Environment(e.to_string())
}

/// A finished command: its exit code and the stdout record.
#[derive(Debug)]
pub struct Report {
    pub code: i32,
    pub summary: Value,
}

fn read_to_string(path: &Path, what: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {what} {}: {e}", path.display())))
}

fn sim_rules(settings: &Settings) -> Result<SimRules, CliError> {
    match &settings.rules {
        Some(p) => SimRules::parse(&read_to_string(p, "rules")?)
            .map_err(|e| CliError::Input(format!("rules {}: {e}", p.display()))),
        None => Ok(SimRules::default()),
    }
}

fn verifier(settings: &Settings) -> Result<Box<dyn Verifier>, CliError> {
    Ok(match settings.verifier {
        VerifierKind::Sim => Box::new(SimVerifier::new(sim_rules(settings)?)),
        VerifierKind::Real => Box::new(
            LakeVerifier::locate(settings.toolchain_root.as_deref(), settings.build_timeout)
                .map_err(verifier_error)?,
        ),
    })
}

fn backend(settings: &Settings) -> Result<Box<dyn AgentBackend>, CliError> {
    match settings.backend {
        BackendKind::Scripted => {
            let path = settings
                .fixture
                .as_ref()
                .ok_or_else(|| CliError::Input("--backend scripted needs --fixture".into()))?;
            let fixture = Fixture::parse(&read_to_string(path, "fixture")?)
                .map_err(|e| CliError::Input(format!("fixture {}: {e}", path.display())))?;
            Ok(Box::new(ScriptedBackend::new(fixture)))
        }
        BackendKind::Live => {
            let mut config = LiveConfig::default();
            let live = &settings.live;
            if let Some(e) = &live.endpoint {
                config.endpoint = e.clone();
            }
            if let Some(m) = &live.model {
                config.model = m.clone();
            }
            if let Some(n) = live.max_tokens {
                config.max_tokens = n;
            }
            if let Some(t) = live.timeout {
                config.timeout = t;
            }
            if let Some(dir) = &live.templates {
                config.templates = PromptTemplates::load_dir(dir).map_err(|e| CliError::Input(e.to_string()))?;
            }
            let transport = Box::new(UreqTransport::new(config.timeout));
            match LiveBackend::from_env(config, transport) {
                Ok(b) => Ok(Box::new(b)),
                Err(e @ AgentError::Auth(_)) => Err(CliError::Environment(e.to_string())),
                Err(e) => Err(CliError::Input(e.to_string())),
            }
        }
    }
}

pub struct RunArgs {
    pub file: PathBuf,
    pub target: Option<String>,
    pub stop_file: Option<PathBuf>,
    pub interrupted: Option<Arc<AtomicBool>>,
}

pub fn cmd_run(args: &RunArgs, settings: &Settings) -> Result<Report, CliError> {
    let input = load_input(&args.file, args.target.as_deref()).map_err(|e| CliError::Input(e.to_string()))?;
    let mut backend = backend(settings)?;
    let verifier = verifier(settings)?;

    std::fs::create_dir_all(&settings.out)
        .map_err(|e| CliError::Environment(format!("cannot create {}: {e}", settings.out.display())))?;
    let ws_root = settings.out.join("workspace");
    let ledger_path = settings.out.join("ledger.jsonl");
    let writer = LedgerWriter::create(&ledger_path)
        .map_err(|e| CliError::Environment(format!("{}: {e}", ledger_path.display())))?;

    let mut cancel = Cancel::none();
    if let Some(flag) = &args.interrupted {
        cancel = cancel.with_flag(Arc::clone(flag));
    }
    if let Some(stop) = &args.stop_file {
        cancel = cancel.with_stop_file(stop);
    }
    let opts = RunOptions {
        config: settings.loop_config.clone(),
        permitted: settings.permitted.clone(),
        cancel,
        toolchain_pin: settings.toolchain_pin.clone(),
        mathlib_rev: settings.mathlib_rev.clone(),
    };
    log::info!(
        "running {} with {} backend and {} verifier",
        args.file.display(),
        backend.name(),
        verifier.mode()
    );
    let (outcome, ledger) = run(&input, backend.as_mut(), verifier.as_ref(), &opts, &ws_root, writer).map_err(
        |e| match e {
            LoopError::Config(msg) => CliError::Input(msg),
            LoopError::Verifier(v) => verifier_error(v),
            LoopError::Workspace(w) => workspace_error(w),
            other => CliError::Environment(other.to_string()),
        },
    )?;
    let record = ledger.outcome();
    let usage = ledger.usage_sum();
    let cost = settings.cost.total(ledger.usages().map(|u| &u.usage));
    log::info!("{outcome}; cost {cost}");
    let summary = json!({
        "command": "run",
        "verdict": outcome.verdict,
        "reason": outcome.reason,
        "plan_size": record.map(|o| o.statement_count),
        "plan_revision": outcome.final_plan_revision,
        "wall_clock_ms": record.map(|o| o.wall_clock_ms),
        "usage": usage,
        "cost_usd": cost.to_string(),
        "ledger": ledger_path,
        "workspace": ws_root,
    });
    Ok(Report {
        code: if outcome.is_solved() { 0 } else { 1 },
        summary,
    })
}

pub struct AuditArgs {
    pub workspace: PathBuf,
    pub decl: Option<String>,
}

pub fn cmd_audit(args: &AuditArgs, settings: &Settings) -> Result<Report, CliError> {
    let ws = Workspace::open(&args.workspace).map_err(|e| match e {
        WorkspaceError::Io { .. } | WorkspaceError::Metadata { .. } => {
            CliError::Input(format!("not a workspace: {e}"))
        }
        other => workspace_error(other),
    })?;
    let verifier = verifier(settings)?;
    let mut anchor = ws.anchor().clone();
    if let Some(d) = &args.decl {
        anchor.decl_name = d.clone();
    }
    let report = audit_verdict(&ws, &anchor, verifier.as_ref(), &settings.permitted);
    for line in &report.details {
        log::warn!("{line}");
    }
    let mut summary = serde_json::to_value(&report).expect("report serializes");
    summary["command"] = json!("audit");
    summary["decl"] = json!(anchor.decl_name);
    summary["permitted"] = json!(settings.permitted);
    Ok(Report {
        code: if report.pass { 0 } else { 1 },
        summary,
    })
}

fn read_ledger(path: &Path) -> Result<RunLedger, CliError> {
    RunLedger::read(path).map_err(|e| match e {
        LedgerError::Io(io) => CliError::Input(format!("cannot read ledger {}: {io}", path.display())),
        other => CliError::Input(format!("{}: {other}", path.display())),
    })
}

pub fn cmd_replay(path: &Path) -> Result<Report, CliError> {
    let ledger = read_ledger(path)?;
    Ok(match replay(&ledger) {
        Ok(r) => Report {
            code: 0,
            summary: json!({
                "command": "replay",
                "status": "frames consistent",
                "frames_checked": r.frames_checked,
                "diffs_applied": r.diffs_applied,
                "final_plan_size": r.final_plan_size,
                "final_revision": r.final_revision,
            }),
        },
        Err(e) => {
            log::error!("{e}");
            Report {
                code: 1,
                summary: json!({"command": "replay", "status": "inconsistent", "error": e.to_string()}),
            }
        }
    })
}

pub fn cmd_trace(path: &Path, format: &str, out: Option<&Path>) -> Result<Report, CliError> {
    let format: TraceFormat = format.parse().map_err(|e: proofloop::ledger::UnsupportedFormat| {
        CliError::Input(e.to_string())
    })?;
    let ledger = read_ledger(path)?;
    let text = export_trace(&ledger, format).map_err(|e| CliError::Input(e.to_string()))?;
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| path.with_extension(format!("trace.{}", format.extension())));
    std::fs::write(&out, text).map_err(|e| CliError::Environment(format!("{}: {e}", out.display())))?;
    Ok(Report {
        code: 0,
        summary: json!({
            "command": "trace",
            "format": format.extension(),
            "frames": ledger.frames().count(),
            "output": out,
        }),
    })
}

fn expand(patterns: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = BTreeSet::new();
    for p in patterns {
        if p.contains(['*', '?', '[']) {
            let matches = glob::glob(p).map_err(|e| CliError::Input(format!("{p}: {e}")))?;
            let before = out.len();
            for m in matches {
                out.insert(m.map_err(|e| CliError::Input(e.to_string()))?);
            }
            if out.len() == before {
                return Err(CliError::Input(format!("{p}: no ledgers match")));
            }
        } else {
            out.insert(PathBuf::from(p));
        }
    }
    Ok(out.into_iter().collect())
}

pub fn cmd_stats(patterns: &[String]) -> Result<Report, CliError> {
    let paths = expand(patterns)?;
    let mut solved = Vec::new();
    let mut skipped = Vec::new();
    for p in &paths {
        let ledger = read_ledger(p)?;
        let s = RunSummary::of(&ledger)
            .ok_or_else(|| CliError::Input(format!("{}: ledger has no outcome record", p.display())))?;
        if s.solved {
            solved.push(s);
        } else {
            skipped.push(p.clone());
        }
    }
    let st = aggregate_stats(&solved).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(Report {
        code: 0,
        summary: json!({
            "command": "stats",
            "runs": st.runs,
            "skipped_unsolved": skipped,
            "row": render_row(&st),
            "mean_time_h": st.mean_time,
            "std_time_h": st.std_time,
            "median_time_h": st.median_time,
            "min_time_h": st.min_time,
            "max_time_h": st.max_time,
            "mean_statements": st.mean_statements,
            "std_statements": st.std_statements,
            "mean_min_per_statement": st.mean_min_per_statement,
            "std_min_per_statement": st.std_min_per_statement,
        }),
    })
}

/// Installs a Ctrl-C handler that raises the returned flag.
pub fn interrupt_flag() -> Option<Arc<AtomicBool>> {
    let flag = Arc::new(AtomicBool::new(false));
    let f = Arc::clone(&flag);
    match ctrlc::set_handler(move || {
        log::warn!("interrupt received; stopping before the next agent call");
        f.store(true, Ordering::SeqCst);
    }) {
        Ok(()) => Some(flag),
        Err(e) => {
            log::warn!("cannot install interrupt handler: {e}");
            None
        }
    }
}
