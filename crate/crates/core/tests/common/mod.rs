#![allow(dead_code)]

pub mod audit_matrix;
pub mod http_stub;
pub mod oracle;
pub mod scripted;
pub mod ten_runs;

use std::path::{Path, PathBuf};

use proofloop::agents::{Fixture, ScriptedBackend};
use proofloop::leanenv::{SimRules, SimVerifier};
use proofloop::ledger::{LedgerWriter, RunLedger};
use proofloop::looper::{load_input, run, RunOptions, RunOutcome};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub struct Burnside {
    pub outcome: RunOutcome,
    pub ledger: RunLedger,
    pub workspace: tempfile::TempDir,
    /// Scripted replies used.
    pub consumed: usize,
}

pub fn burnside_parts() -> (PathBuf, ScriptedBackend, SimVerifier) {
    let dir = fixtures().join("burnside");
    let fixture = Fixture::parse(&std::fs::read_to_string(dir.join("burnside.fx.toml")).unwrap()).unwrap();
    let rules = SimRules::parse(&std::fs::read_to_string(dir.join("rules.toml")).unwrap()).unwrap();
    (dir.join("burnside.lean"), ScriptedBackend::new(fixture), SimVerifier::new(rules))
}

pub fn run_burnside(opts: &RunOptions) -> Burnside {
    let (input, mut backend, verifier) = burnside_parts();
    let input = load_input(&input, None).unwrap();
    let workspace = tempfile::tempdir().unwrap();
    let (outcome, ledger) = run(
        &input,
        &mut backend,
        &verifier,
        opts,
        workspace.path(),
        LedgerWriter::in_memory(),
    )
    .unwrap();
    Burnside {
        outcome,
        ledger,
        workspace,
        consumed: backend.consumed(),
    }
}
