//! Fixture-driven backend.
//!
//! A fixture is TOML with one `[[entry]]` per scripted reply. An entry is
//! keyed by task kind, check kind, subject node and occurrence index (how
//! many times that same (kind, check, node) triple has been asked before);
//! `repeat = n` makes it answer occurrences `occurrence .. occurrence + n`.
//! Exactly one payload field must be present and must fit the kind:
//! `diff` for planning, `source` for Lean work, `pass` (+ `note`) for checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    AgentBackend, AgentError, AgentPayload, AgentTask, BackendReply, CheckKind, CheckVerdict, LeanDraft, TaskKey,
    TaskKind, TokenUsage,
};
use crate::plan::{PlanDiff, StatementId};

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureEntry {
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<StatementId>,
    #[serde(default)]
    pub occurrence: u32,
    #[serde(default = "one")]
    pub repeat: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<PlanDiff>,
}

impl FixtureEntry {
    fn payload(&self) -> Result<AgentPayload, String> {
        let present = [self.pass.is_some(), self.source.is_some(), self.diff.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if present != 1 {
            return Err(format!("expected exactly one payload field, found {present}"));
        }
        let payload = if let Some(pass) = self.pass {
            AgentPayload::Verdict(CheckVerdict {
                pass,
                note: self.note.clone().unwrap_or_default(),
            })
        } else if let Some(source) = &self.source {
            AgentPayload::Lean(LeanDraft { source: source.clone() })
        } else {
            AgentPayload::Diff(self.diff.clone().expect("counted above"))
        };
        if !payload.matches(self.kind) {
            return Err(format!("{} payload on a {} entry", payload.kind_name(), self.kind.as_str()));
        }
        Ok(payload)
    }
}

type Slot = (TaskKind, Option<CheckKind>, Option<StatementId>);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fixture {
    entries: Vec<FixtureEntry>,
    /// Per slot: `(first occurrence, past-the-end occurrence, entry index)`,
    /// sorted and non-overlapping.
    ranges: BTreeMap<Slot, Vec<(u32, u32, usize)>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureFile {
    #[serde(default)]
    entry: Vec<FixtureEntry>,
}

impl Fixture {
    pub fn parse(text: &str) -> Result<Self, AgentError> {
        let file: FixtureFile = toml::from_str(text).map_err(|e| AgentError::FixtureParse(e.to_string()))?;
        Self::from_entries(file.entry)
    }

    pub fn from_entries(entries: Vec<FixtureEntry>) -> Result<Self, AgentError> {
        let mut ranges: BTreeMap<Slot, Vec<(u32, u32, usize)>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            let at = |msg: String| AgentError::FixtureParse(format!("entry {}: {msg}", i + 1));
            e.payload().map_err(at)?;
            if (e.kind == TaskKind::Check) != e.check.is_some() {
                return Err(at("`check` is required on check entries and only there".into()));
            }
            if e.repeat == 0 {
                return Err(at("`repeat` must be at least 1".into()));
            }
            let slot = (e.kind, e.check, e.node.clone());
            ranges
                .entry(slot)
                .or_default()
                .push((e.occurrence, e.occurrence + e.repeat, i));
        }
        for (slot, rs) in ranges.iter_mut() {
            rs.sort_unstable();
            for w in rs.windows(2) {
                if w[1].0 < w[0].1 {
                    return Err(AgentError::FixtureParse(format!(
                        "entries {} and {} overlap for {} {:?} {:?}",
                        w[0].2 + 1,
                        w[1].2 + 1,
                        slot.0.as_str(),
                        slot.1,
                        slot.2
                    )));
                }
            }
        }
        Ok(Self { entries, ranges })
    }

    pub fn entries(&self) -> &[FixtureEntry] {
        &self.entries
    }

    pub fn render(&self) -> String {
        toml::to_string(&FixtureFile {
            entry: self.entries.clone(),
        })
        .expect("fixture is representable as TOML")
    }

    pub fn lookup(&self, key: &TaskKey) -> Option<&FixtureEntry> {
        let slot = (key.kind, key.check, key.node.clone());
        self.ranges
            .get(&slot)?
            .iter()
            .find(|(lo, hi, _)| (*lo..*hi).contains(&key.occurrence))
            .map(|&(_, _, i)| &self.entries[i])
    }
}

/// Replays a fixture. The cursor (occurrences consumed per slot) is private
/// to one backend instance, so one instance serves exactly one run.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    fixture: Fixture,
    cursor: BTreeMap<Slot, u32>,
}

impl ScriptedBackend {
    pub fn new(fixture: Fixture) -> Self {
        Self {
            fixture,
            cursor: BTreeMap::new(),
        }
    }

    /// Key the next invocation of `task` would look up.
    pub fn key_for(&self, task: &AgentTask) -> TaskKey {
        let slot = slot_of(task);
        TaskKey {
            occurrence: self.cursor.get(&slot).copied().unwrap_or(0),
            kind: slot.0,
            check: slot.1,
            node: slot.2,
        }
    }

    /// Occurrences consumed so far, per slot.
    pub fn consumed(&self) -> usize {
        self.cursor.values().map(|&n| n as usize).sum()
    }
}

fn slot_of(task: &AgentTask) -> Slot {
    (task.kind, task.check_kind, task.subject.node_id.clone())
}

impl AgentBackend for ScriptedBackend {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn respond(&mut self, task: &AgentTask) -> Result<BackendReply, AgentError> {
        let key = self.key_for(task);
        let entry = self.fixture.lookup(&key).ok_or_else(|| AgentError::FixtureMiss(key.clone()))?;
        let payload = entry.payload().map_err(AgentError::FixtureParse)?;
        let usage = entry.usage.unwrap_or_default();
        *self.cursor.entry(slot_of(task)).or_insert(0) += 1;
        Ok(BackendReply { payload, usage })
    }
}
