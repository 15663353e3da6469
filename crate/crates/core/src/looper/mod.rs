//! The outer loop: pick the next statement, let the Lean Agent work on it,
//! route the build through the checks, replan on failure, and audit once
//! every statement is closed.

mod input;
mod run;
mod types;

pub use input::{load_input, parse_input, InputError, RunInput};
pub use run::{run, Cancel, LoopError, RunOptions};
pub use types::*;

use crate::agents::{CheckKind, CheckVerdict};
use crate::leanenv::BuildReport;
use crate::plan::DiffCause;

/// Where a finished Lean work step goes. A clean build is checked for
/// faithfulness; anything else that compiled with sorries, or an exhausted
/// budget, counts as "cannot close" and goes to the Math check.
pub fn route_build_result(report: &BuildReport, exhausted: bool) -> NextStep {
    if !exhausted && report.clean {
        NextStep::Check(CheckKind::Faithfulness)
    } else {
        NextStep::Check(CheckKind::Math)
    }
}

pub fn route_check_verdict(kind: CheckKind, verdict: &CheckVerdict) -> NextStep {
    match (kind, verdict.pass) {
        (CheckKind::Faithfulness, true) => NextStep::CloseAndSelectNext,
        (CheckKind::Faithfulness, false) => NextStep::Replan(DiffCause::FaithfulnessFail),
        (CheckKind::Math, true) => NextStep::Check(CheckKind::Decomposition),
        (CheckKind::Math, false) => NextStep::Replan(DiffCause::MathFail),
        // Pass means no split is needed.
        (CheckKind::Decomposition, true) => NextStep::RetrySameNode,
        (CheckKind::Decomposition, false) => NextStep::Replan(DiffCause::DecompositionSplit),
    }
}
