use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::leanenv::sorry_declarations;
use crate::plan::AnchorDecl;

/// A parsed input file and the declaration the run targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunInput {
    pub path: PathBuf,
    pub source: String,
    pub anchor: AnchorDecl,
}

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no `sorry` declaration found in {0}")]
    NoSorry(PathBuf),
    #[error("`{target}` is not a `sorry` declaration in {path} (candidates: {candidates})")]
    TargetNotFound {
        path: PathBuf,
        target: String,
        candidates: String,
    },
}

/// Picks the anchor: the declaration named `target` (short or qualified
/// name), otherwise the last `sorry` declaration in the file.
pub fn parse_input(path: &Path, source: String, target: Option<&str>) -> Result<RunInput, InputError> {
    let decls = sorry_declarations(&source);
    let chosen = match target {
        Some(t) => decls
            .iter()
            .find(|d| d.name == t || d.qualified_name == t)
            .ok_or_else(|| InputError::TargetNotFound {
                path: path.to_owned(),
                target: t.to_owned(),
                candidates: decls.iter().map(|d| d.qualified_name.as_str()).collect::<Vec<_>>().join(", "),
            })?,
        None => decls.last().ok_or_else(|| InputError::NoSorry(path.to_owned()))?,
    };
    let anchor = AnchorDecl {
        decl_name: chosen.name.clone(),
        signature: chosen.signature.normalized.clone(),
        original_body: chosen.body.clone(),
    };
    Ok(RunInput {
        path: path.to_owned(),
        source,
        anchor,
    })
}

pub fn load_input(path: &Path, target: Option<&str>) -> Result<RunInput, InputError> {
    let source = std::fs::read_to_string(path).map_err(|source| InputError::Read {
        path: path.to_owned(),
        source,
    })?;
    parse_input(path, source, target)
}
