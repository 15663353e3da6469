//! Text format for plans: TOML with one `[[node]]` table per node in
//! insertion order. The topological order is not stored; it is recomputed on
//! load, which also re-validates the plan.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PlanError, PlanNode, ProofPlan, StatementId};

#[derive(Debug, Error)]
pub enum PlanFormatError {
    #[error("plan syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid plan: {0}")]
    Invalid(#[from] PlanError),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    #[serde(default)]
    revision: u64,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    retired: BTreeSet<StatementId>,
    node: Vec<PlanNode>,
}

pub fn render_plan(plan: &ProofPlan) -> String {
    let file = PlanFile {
        revision: plan.revision,
        retired: plan.retired.clone(),
        node: plan.nodes.clone(),
    };
    toml::to_string(&file).expect("plan is always representable as TOML")
}

pub fn parse_plan(text: &str) -> Result<ProofPlan, PlanFormatError> {
    let file: PlanFile = toml::from_str(text)?;
    Ok(ProofPlan::assemble(file.node, file.revision, file.retired)?)
}
