//! Verifier adapter.
//!
//! A [`Verifier`] builds a [`Workspace`] and reports the axioms a declaration
//! depends on. [`SimVerifier`] answers from a rule table and is what tests and
//! replays use; [`LakeVerifier`] shells out to `lake`. The final audit
//! ([`audit_verdict`]) combines the verifier with the text-level checks in
//! this module, which need no toolchain at all.

mod audit;
mod real;
pub mod scan;
pub mod signature;
mod sim;
pub mod syntax;
mod workspace;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::StatementId;

pub use audit::{audit_verdict, default_permitted, signature_match, AuditReport, PERMITTED_AXIOMS};
pub use real::{parse_axiom_output, parse_build_output, LakeVerifier, DEFAULT_BUILD_TIMEOUT};
pub use scan::{scan_forbidden, scan_source, ForbiddenHit, ForbiddenToken};
pub use signature::{extract_signature, normalize, sorry_declarations, DeclSignature, SignatureError, SorryDecl};
pub use sim::{sim_key, SimRule, SimRules, SimVerifier, SIM_KEY_MARKER};
pub use workspace::{module_name, LockGuard, Workspace, WorkspaceError, LOCK_FILE};

/// Axiom Lean records for any proof that still contains `sorry`.
pub const SORRY_AX: &str = "sorryAx";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SorrySite {
    pub file: PathBuf,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    /// No errors and no surviving `sorry`.
    pub clean: bool,
    pub sorry_sites: Vec<SorrySite>,
    /// Error diagnostics, one message per entry.
    pub errors: Vec<String>,
    /// Captured tool output.
    pub diagnostics: String,
    pub elapsed_ms: u64,
}

impl BuildReport {
    pub fn clean() -> Self {
        Self {
            clean: true,
            sorry_sites: Vec::new(),
            errors: Vec::new(),
            diagnostics: String::new(),
            elapsed_ms: 0,
        }
    }

    /// The build succeeded, possibly with `sorry` warnings.
    pub fn compiles(&self) -> bool {
        self.errors.is_empty()
    }

    /// Error text handed back to agents on the next attempt.
    pub fn error_text(&self) -> Option<String> {
        if self.errors.is_empty() && self.sorry_sites.is_empty() {
            return None;
        }
        let mut lines: Vec<String> = self.errors.clone();
        lines.extend(
            self.sorry_sites
                .iter()
                .map(|s| format!("{}:{}: declaration uses 'sorry'", s.file.display(), s.line)),
        );
        Some(lines.join("\n"))
    }
}

/// What to build.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuildScope {
    Node(StatementId),
    All,
}

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("lean toolchain not found: {0}")]
    ToolchainMissing(String),
    #[error("build exceeded {0:?}")]
    BuildTimeout(Duration),
    #[error("axiom driver output could not be parsed: {0}")]
    DriverFail(String),
    #[error("no source written for node `{0}`")]
    NoSource(StatementId),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub trait Verifier {
    /// `"sim"` or `"real"`.
    fn mode(&self) -> &'static str;

    fn build(&self, ws: &Workspace, scope: &BuildScope) -> Result<BuildReport, VerifierError>;

    /// Transitive axiom set of `decl_name`.
    fn axioms(&self, ws: &Workspace, decl_name: &str) -> Result<BTreeSet<String>, VerifierError>;
}

impl<V: Verifier + ?Sized> Verifier for &V {
    fn mode(&self) -> &'static str {
        (**self).mode()
    }

    fn build(&self, ws: &Workspace, scope: &BuildScope) -> Result<BuildReport, VerifierError> {
        (**self).build(ws, scope)
    }

    fn axioms(&self, ws: &Workspace, decl_name: &str) -> Result<BTreeSet<String>, VerifierError> {
        (**self).axioms(ws, decl_name)
    }
}

impl<V: Verifier + ?Sized> Verifier for Box<V> {
    fn mode(&self) -> &'static str {
        (**self).mode()
    }

    fn build(&self, ws: &Workspace, scope: &BuildScope) -> Result<BuildReport, VerifierError> {
        (**self).build(ws, scope)
    }

    fn axioms(&self, ws: &Workspace, decl_name: &str) -> Result<BTreeSet<String>, VerifierError> {
        (**self).axioms(ws, decl_name)
    }
}
