//! Rule-table verifier.
//!
//! A source opts into a rule with a line comment `-- sim-key: <key>`. The
//! rule says which lines carry a surviving `sorry`, which errors the build
//! reports and which axioms the file's declarations depend on. Sources
//! without a key are judged by the forbidden-token scanner alone: a code-level
//! `sorry` is a sorry site (and implies `sorryAx`), anything else builds
//! clean with no axioms.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scan::{scan_source, ForbiddenToken};
use super::syntax::{segments, SegmentKind};
use super::{BuildReport, BuildScope, SorrySite, Verifier, VerifierError, Workspace, SORRY_AX};

pub const SIM_KEY_MARKER: &str = "sim-key:";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimRule {
    pub key: String,
    #[serde(default)]
    pub sorry_lines: Vec<usize>,
    #[serde(default)]
    pub errors: Vec<String>,
    #[serde(default)]
    pub axioms: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimRules {
    rules: BTreeMap<String, SimRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesFile {
    #[serde(default)]
    rule: Vec<SimRule>,
}

impl SimRules {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        let file: RulesFile = toml::from_str(text)?;
        Ok(Self::from_rules(file.rule))
    }

    pub fn from_rules(rules: impl IntoIterator<Item = SimRule>) -> Self {
        Self {
            rules: rules.into_iter().map(|r| (r.key.clone(), r)).collect(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&SimRule> {
        self.rules.get(key)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// The key named by the first `-- sim-key:` comment, if any.
pub fn sim_key(src: &str) -> Option<&str> {
    segments(src)
        .into_iter()
        .filter(|s| s.kind == SegmentKind::LineComment)
        .find_map(|s| {
            let body = src[s.start + 2..s.end].trim();
            body.strip_prefix(SIM_KEY_MARKER).map(str::trim)
        })
}

#[derive(Debug, Clone, Default)]
pub struct SimVerifier {
    rules: SimRules,
}

struct FileVerdict {
    sorry_lines: Vec<usize>,
    errors: Vec<String>,
    axioms: BTreeSet<String>,
}

impl SimVerifier {
    pub fn new(rules: SimRules) -> Self {
        Self { rules }
    }

    fn judge(&self, src: &str) -> FileVerdict {
        match sim_key(src) {
            Some(key) => match self.rules.get(key) {
                Some(rule) => FileVerdict {
                    sorry_lines: rule.sorry_lines.clone(),
                    errors: rule.errors.clone(),
                    axioms: rule.axioms.clone(),
                },
                None => FileVerdict {
                    sorry_lines: Vec::new(),
                    errors: vec![format!("unknown simulation key `{key}`")],
                    axioms: BTreeSet::new(),
                },
            },
            None => {
                let sorry_lines: Vec<usize> = scan_source(src)
                    .into_iter()
                    .filter(|(t, _)| *t == ForbiddenToken::Sorry)
                    .map(|(_, line)| line)
                    .collect();
                let axioms = if sorry_lines.is_empty() {
                    BTreeSet::new()
                } else {
                    BTreeSet::from([SORRY_AX.to_owned()])
                };
                FileVerdict {
                    sorry_lines,
                    errors: Vec::new(),
                    axioms,
                }
            }
        }
    }

    fn scoped_files(&self, ws: &Workspace, scope: &BuildScope) -> Result<Vec<PathBuf>, VerifierError> {
        match scope {
            BuildScope::Node(id) => ws
                .node_path(id)
                .map(|p| vec![p])
                .ok_or_else(|| VerifierError::NoSource(id.clone())),
            BuildScope::All => Ok(ws.files()),
        }
    }
}

fn rel<'a>(ws: &Workspace, path: &'a Path) -> &'a Path {
    path.strip_prefix(ws.root()).unwrap_or(path)
}

impl Verifier for SimVerifier {
    fn mode(&self) -> &'static str {
        "sim"
    }

    fn build(&self, ws: &Workspace, scope: &BuildScope) -> Result<BuildReport, VerifierError> {
        let mut report = BuildReport::clean();
        let mut diagnostics = String::new();
        for path in self.scoped_files(ws, scope)? {
            let src = fs::read_to_string(&path)?;
            let verdict = self.judge(&src);
            let file = rel(ws, &path).to_path_buf();
            // Same shape the real build emits, so both parse identically.
            for msg in &verdict.errors {
                diagnostics.push_str(&format!("error: {}:1:0: {msg}\n", file.display()));
            }
            for &line in &verdict.sorry_lines {
                diagnostics.push_str(&format!("warning: {}:{line}:0: declaration uses 'sorry'\n", file.display()));
            }
            report.errors.extend(verdict.errors);
            report
                .sorry_sites
                .extend(verdict.sorry_lines.into_iter().map(|line| SorrySite { file: file.clone(), line }));
        }
        report.clean = report.errors.is_empty() && report.sorry_sites.is_empty();
        report.diagnostics = diagnostics;
        Ok(report)
    }

    fn axioms(&self, ws: &Workspace, _decl_name: &str) -> Result<BTreeSet<String>, VerifierError> {
        let mut out = BTreeSet::new();
        for path in ws.files() {
            let src = fs::read_to_string(&path)?;
            out.extend(self.judge(&src).axioms);
        }
        Ok(out)
    }
}
