//! The solved-condition audit.

use std::collections::BTreeSet;
use std::fs;

use serde::{Deserialize, Serialize};

use super::scan::{scan_forbidden, ForbiddenHit};
use super::signature::{declarations, extract_signature, normalize};
use super::{Verifier, Workspace, SORRY_AX};
use crate::plan::AnchorDecl;

/// Library axioms a solved proof may depend on.
pub const PERMITTED_AXIOMS: [&str; 3] = ["propext", "Quot.sound", "Classical.choice"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub axioms_used: BTreeSet<String>,
    pub forbidden: Vec<ForbiddenHit>,
    pub signature_match: bool,
    pub pass: bool,
    /// Why a component failed, if one did.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
}

/// Whether the target file still declares the anchor with the original header.
///
/// `Err` carries the reason extraction failed; callers treat it as a
/// mismatch.
pub fn signature_match(anchor: &AnchorDecl, ws: &Workspace) -> Result<bool, String> {
    let path = ws.root().join(ws.target_file());
    let src = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let sig = extract_signature(&src, &anchor.decl_name).map_err(|e| e.to_string())?;
    Ok(sig.normalized == normalize(&anchor.signature))
}

/// Fully qualified name of the anchor in the target file, falling back to the
/// name as recorded.
fn qualified_anchor(anchor: &AnchorDecl, ws: &Workspace) -> String {
    let path = ws.root().join(ws.target_file());
    fs::read_to_string(path)
        .ok()
        .and_then(|src| {
            declarations(&src)
                .into_iter()
                .find(|d| {
                    d.name.as_deref() == Some(anchor.decl_name.as_str())
                        || d.qualified_name.as_deref() == Some(anchor.decl_name.as_str())
                })
                .and_then(|d| d.qualified_name)
        })
        .unwrap_or_else(|| anchor.decl_name.clone())
}

/// Scans every workspace file, checks the anchor signature and asks the
/// verifier for the anchor's axioms. Any component error fails the audit.
pub fn audit_verdict<V: Verifier + ?Sized>(
    ws: &Workspace,
    anchor: &AnchorDecl,
    verifier: &V,
    permitted: &BTreeSet<String>,
) -> AuditReport {
    let mut details = Vec::new();

    let forbidden = match scan_forbidden(&ws.files()) {
        Ok(hits) => hits
            .into_iter()
            .map(|h| ForbiddenHit {
                file: h.file.strip_prefix(ws.root()).map(|p| p.to_path_buf()).unwrap_or(h.file),
                ..h
            })
            .collect(),
        Err(e) => {
            details.push(format!("scan failed: {e}"));
            Vec::new()
        }
    };
    for hit in &forbidden {
        details.push(format!("forbidden `{}` at {}:{}", hit.token, hit.file.display(), hit.line));
    }

    let signature_match = match signature_match(anchor, ws) {
        Ok(true) => true,
        Ok(false) => {
            details.push(format!("signature of `{}` differs from the anchor", anchor.decl_name));
            false
        }
        Err(e) => {
            details.push(format!("signature check failed: {e}"));
            false
        }
    };

    let mut axioms_ok = true;
    let axioms_used = match verifier.axioms(ws, &qualified_anchor(anchor, ws)) {
        Ok(set) => set,
        Err(e) => {
            details.push(format!("axiom audit failed: {e}"));
            axioms_ok = false;
            BTreeSet::new()
        }
    };
    if axioms_used.contains(SORRY_AX) {
        details.push(format!("{SORRY_AX} in axiom closure"));
        axioms_ok = false;
    }
    let extra: Vec<&String> = axioms_used.iter().filter(|a| !permitted.contains(*a)).collect();
    if !extra.is_empty() {
        details.push(format!(
            "axioms outside the permitted set: {}",
            extra.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        ));
        axioms_ok = false;
    }

    let pass = signature_match && forbidden.is_empty() && axioms_ok && details.is_empty();
    AuditReport {
        axioms_used,
        forbidden,
        signature_match,
        pass,
        details,
    }
}

/// The default permitted set as owned strings.
pub fn default_permitted() -> BTreeSet<String> {
    PERMITTED_AXIOMS.iter().map(|s| s.to_string()).collect()
}
