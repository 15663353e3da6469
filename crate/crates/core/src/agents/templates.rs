//! Prompt templates: plain text with `{{name}}` placeholders.
//!
//! Defaults are compiled in from `templates/`; a directory holding files of
//! the same names overrides them one by one.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{AgentTask, CheckKind, TaskKind};

pub const PLACEHOLDERS: &[&str] = &[
    "node_id",
    "statement",
    "sketch",
    "dep_statements",
    "anchor_signature",
    "lean_source",
    "build_errors",
    "cause",
];

const NAMES: [&str; 6] = [
    "plan_initial",
    "plan_revise",
    "lean_work",
    "check_math",
    "check_decomposition",
    "check_faithfulness",
];

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template {name}: unknown placeholder `{{{{{placeholder}}}}}`")]
    UnknownPlaceholder { name: String, placeholder: String },
    #[error("template {name}: unterminated placeholder")]
    Unterminated { name: String },
    #[error("template {name}: {source}")]
    Io {
        name: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    /// Indexed like `NAMES`.
    texts: [String; 6],
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            texts: [
                include_str!("../../templates/plan_initial.txt").to_owned(),
                include_str!("../../templates/plan_revise.txt").to_owned(),
                include_str!("../../templates/lean_work.txt").to_owned(),
                include_str!("../../templates/check_math.txt").to_owned(),
                include_str!("../../templates/check_decomposition.txt").to_owned(),
                include_str!("../../templates/check_faithfulness.txt").to_owned(),
            ],
        }
    }
}

fn validate(name: &str, text: &str) -> Result<(), TemplateError> {
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        let close = after.find("}}").ok_or_else(|| TemplateError::Unterminated { name: name.into() })?;
        let placeholder = after[..close].trim();
        if !PLACEHOLDERS.contains(&placeholder) {
            return Err(TemplateError::UnknownPlaceholder {
                name: name.into(),
                placeholder: placeholder.into(),
            });
        }
        rest = &after[close + 2..];
    }
    Ok(())
}

fn index_of(task: &AgentTask) -> usize {
    match (task.kind, task.check_kind) {
        (TaskKind::PlanInitial, _) => 0,
        (TaskKind::PlanRevise, _) => 1,
        (TaskKind::LeanWork, _) => 2,
        (TaskKind::Check, Some(CheckKind::Math)) => 3,
        (TaskKind::Check, Some(CheckKind::Decomposition)) => 4,
        (TaskKind::Check, Some(CheckKind::Faithfulness) | None) => 5,
    }
}

impl PromptTemplates {
    /// Defaults, with any `<name>.txt` found in `dir` taking precedence.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut t = Self::default();
        for (i, name) in NAMES.iter().enumerate() {
            let path = dir.join(format!("{name}.txt"));
            if path.is_file() {
                let text = fs::read_to_string(&path).map_err(|source| TemplateError::Io {
                    name: (*name).into(),
                    source,
                })?;
                validate(name, &text)?;
                t.texts[i] = text;
            }
        }
        Ok(t)
    }

    pub fn validate_all(&self) -> Result<(), TemplateError> {
        NAMES
            .iter()
            .zip(&self.texts)
            .try_for_each(|(name, text)| validate(name, text))
    }

    /// The prompt for `task`, with absent fields rendered as `(none)`.
    pub fn render(&self, task: &AgentTask) -> String {
        let ctx = &task.subject;
        let none = || "(none)".to_owned();
        let deps = if ctx.dep_statements.is_empty() {
            none()
        } else {
            ctx.dep_statements
                .iter()
                .map(|(id, s)| format!("- {id}: {s}"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        let or_none = |s: &str| if s.is_empty() { none() } else { s.to_owned() };
        let value = |name: &str| -> String {
            match name {
                "node_id" => ctx.node_id.as_ref().map_or_else(none, |n| n.to_string()),
                "statement" => or_none(&ctx.statement),
                "sketch" => or_none(&ctx.sketch),
                "dep_statements" => deps.clone(),
                "anchor_signature" => ctx.anchor_signature.clone().unwrap_or_else(none),
                "lean_source" => ctx.lean_source.clone().unwrap_or_else(none),
                "build_errors" => ctx.build_errors.clone().unwrap_or_else(none),
                "cause" => task.cause.map_or_else(none, |c| c.as_str().to_owned()),
                _ => String::new(),
            }
        };
        let text = &self.texts[index_of(task)];
        let mut out = String::with_capacity(text.len());
        let mut rest = text.as_str();
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            match after.find("}}") {
                Some(close) => {
                    out.push_str(&value(after[..close].trim()));
                    rest = &after[close + 2..];
                }
                None => {
                    out.push_str(&rest[open..]);
                    rest = "";
                }
            }
        }
        out.push_str(rest);
        out
    }
}
