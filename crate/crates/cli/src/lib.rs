//! Command-line driver: argument parsing, settings resolution and the five
//! subcommands. Every command prints exactly one JSON record on stdout;
//! logs go to stderr.

pub mod commands;
pub mod config;

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use commands::{AuditArgs, CliError, Report, RunArgs};
use config::{resolve, BackendKind, ConfigFile, Flags, VerifierKind};

#[derive(Debug, Parser)]
#[command(name = "proofloop", version, about = "Close `sorry` declarations in a Lean 4 file")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the loop on a Lean file.
    Run {
        file: PathBuf,
        /// Declaration to close (default: the last `sorry` declaration).
        #[arg(long)]
        target: Option<String>,
        /// Stop cleanly once this file exists.
        #[arg(long)]
        stop_file: Option<PathBuf>,
        #[command(flatten)]
        settings: SettingsArgs,
    },
    /// Rebuild the plan from a ledger and check every frame.
    Replay { ledger: PathBuf },
    /// Audit a workspace against the solved condition.
    Audit {
        workspace: PathBuf,
        /// Declaration to audit (default: the workspace anchor).
        #[arg(long)]
        decl: Option<String>,
        #[command(flatten)]
        settings: SettingsArgs,
    },
    /// Export the frame trace of a ledger.
    Trace {
        ledger: PathBuf,
        /// `text` or `dot`.
        #[arg(long, default_value = "dot")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate timing statistics over solved runs.
    Stats {
        /// Ledger paths or glob patterns.
        #[arg(required = true)]
        ledgers: Vec<String>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct SettingsArgs {
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Scripted replies (TOML).
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub verifier: Option<VerifierKind>,
    /// Simulated verifier rules (TOML).
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Wall-clock budget, e.g. `4h` or `90m`.
    #[arg(long, value_parser = humantime::parse_duration)]
    pub wall_clock: Option<Duration>,
    #[arg(long)]
    pub compile_budget: Option<u32>,
    #[arg(long)]
    pub replan_limit: Option<u32>,
    /// Permitted axiom (repeatable); replaces the default set.
    #[arg(long = "permit", value_name = "AXIOM")]
    pub permit: Vec<String>,
    /// Output directory for the ledger and workspace.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Lean toolchain root (containing `bin/lake`).
    #[arg(long)]
    pub toolchain_root: Option<PathBuf>,
}

impl SettingsArgs {
    fn flags(&self) -> Flags {
        Flags {
            backend: self.backend,
            fixture: self.fixture.clone(),
            verifier: self.verifier,
            rules: self.rules.clone(),
            wall_clock: self.wall_clock,
            compile_budget: self.compile_budget,
            replan_limit: self.replan_limit,
            permit: self.permit.clone(),
            out: self.out.clone(),
            toolchain_root: self.toolchain_root.clone(),
        }
    }

    fn settings(&self) -> Result<config::Settings, CliError> {
        let file = self.config.as_deref().map(ConfigFile::load).transpose()?;
        Ok(resolve(&self.flags(), file.as_ref(), &|k| std::env::var(k).ok())?)
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Run { .. } => "run",
            Command::Replay { .. } => "replay",
            Command::Audit { .. } => "audit",
            Command::Trace { .. } => "trace",
            Command::Stats { .. } => "stats",
        }
    }
}

pub fn execute(command: &Command) -> Result<Report, CliError> {
    match command {
        Command::Run {
            file,
            target,
            stop_file,
            settings,
        } => {
            let settings = settings.settings()?;
            let args = RunArgs {
                file: file.clone(),
                target: target.clone(),
                stop_file: stop_file.clone(),
                interrupted: commands::interrupt_flag(),
            };
            commands::cmd_run(&args, &settings)
        }
        Command::Replay { ledger } => commands::cmd_replay(ledger),
        Command::Audit {
            workspace,
            decl,
            settings,
        } => {
            let settings = settings.settings()?;
            let args = AuditArgs {
                workspace: workspace.clone(),
                decl: decl.clone(),
            };
            commands::cmd_audit(&args, &settings)
        }
        Command::Trace { ledger, format, out } => commands::cmd_trace(ledger, format, out.as_deref()),
        Command::Stats { ledgers } => commands::cmd_stats(ledgers),
    }
}

/// The stdout record for a command that failed before producing a report.
pub fn error_report(command: &str, err: &CliError) -> Report {
    Report {
        code: err.exit_code(),
        summary: json!({"command": command, "status": "error", "exit_code": err.exit_code(), "error": err.to_string()}),
    }
}
