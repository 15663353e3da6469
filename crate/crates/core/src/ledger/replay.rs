//! Rebuilds the plan from a ledger's diff and status records and checks
//! every recorded frame against it.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{Frame, Record, RunLedger};
use crate::plan::{DiffCause, PlanError, ProofPlan, StatementId};

/// Fields that legitimately differ between two runs of the same inputs.
pub const VOLATILE_FIELDS: &[&str] = &[
    "timestamp",
    "started_at",
    "run_id",
    "elapsed_ms",
    "wall_clock_ms",
    "workspace",
    "input",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub frames_checked: usize,
    pub diffs_applied: usize,
    pub final_plan_size: usize,
    pub final_revision: u64,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("record {0}: ledger does not start with an initial plan")]
    NoInitialPlan(usize),
    #[error("record {record}: {source}")]
    Plan {
        record: usize,
        #[source]
        source: PlanError,
    },
    #[error("record {record}: expected revision {expected}, ledger says {found}")]
    Revision { record: usize, expected: u64, found: u64 },
    #[error("record {record}: invalidated set differs (replayed {replayed:?}, recorded {recorded:?})")]
    Invalidated {
        record: usize,
        replayed: Vec<StatementId>,
        recorded: Vec<StatementId>,
    },
    #[error("record {record}: status of `{node}` was {actual:?}, ledger says {recorded:?}")]
    Status {
        record: usize,
        node: StatementId,
        actual: String,
        recorded: String,
    },
    #[error("frame {index} does not match the replayed plan")]
    FrameMismatch { index: u64 },
    #[error("frame index {found} out of sequence (expected {expected})")]
    FrameIndex { expected: u64, found: u64 },
    #[error("usage records sum to a different total than the outcome")]
    UsageTotal,
    #[error("outcome reports {recorded} statements, replayed plan has {replayed}")]
    StatementCount { recorded: usize, replayed: usize },
}

pub fn replay(ledger: &RunLedger) -> Result<ReplayReport, ReplayError> {
    let mut plan: Option<ProofPlan> = None;
    let mut frames_checked = 0usize;
    let mut diffs_applied = 0usize;
    let mut next_frame = 0u64;
    for (i, record) in ledger.records.iter().enumerate() {
        let rec = i + 1;
        match record {
            Record::Diff(d) => {
                let next = match &plan {
                    None if d.cause == DiffCause::InitialPlan => {
                        let p = ProofPlan::create(d.diff.adds.clone())
                            .map_err(|source| ReplayError::Plan { record: rec, source })?;
                        if !d.invalidated.is_empty() {
                            return Err(ReplayError::Invalidated {
                                record: rec,
                                replayed: vec![],
                                recorded: d.invalidated.clone(),
                            });
                        }
                        p
                    }
                    None => return Err(ReplayError::NoInitialPlan(rec)),
                    Some(p) => {
                        let applied = p
                            .apply_diff(&d.diff)
                            .map_err(|source| ReplayError::Plan { record: rec, source })?;
                        let recorded: BTreeSet<StatementId> = d.invalidated.iter().cloned().collect();
                        if applied.invalidated != recorded {
                            return Err(ReplayError::Invalidated {
                                record: rec,
                                replayed: applied.invalidated.into_iter().collect(),
                                recorded: d.invalidated.clone(),
                            });
                        }
                        applied.plan
                    }
                };
                if next.revision() != d.revision {
                    return Err(ReplayError::Revision {
                        record: rec,
                        expected: next.revision(),
                        found: d.revision,
                    });
                }
                plan = Some(next);
                diffs_applied += 1;
            }
            Record::Status(s) => {
                let p = plan.as_mut().ok_or(ReplayError::NoInitialPlan(rec))?;
                let actual = p
                    .set_status(&s.node, s.to)
                    .map_err(|source| ReplayError::Plan { record: rec, source })?;
                if actual != s.from {
                    return Err(ReplayError::Status {
                        record: rec,
                        node: s.node.clone(),
                        actual: actual.as_str().into(),
                        recorded: s.from.as_str().into(),
                    });
                }
            }
            Record::Frame(f) => {
                let p = plan.as_ref().ok_or(ReplayError::NoInitialPlan(rec))?;
                if f.index != next_frame {
                    return Err(ReplayError::FrameIndex {
                        expected: next_frame,
                        found: f.index,
                    });
                }
                if Frame::of_plan(f.index, p) != *f {
                    return Err(ReplayError::FrameMismatch { index: f.index });
                }
                next_frame += 1;
                frames_checked += 1;
            }
            Record::Outcome(o) => {
                if o.usage_total != ledger.usage_sum() {
                    return Err(ReplayError::UsageTotal);
                }
                let replayed = plan.as_ref().map_or(0, ProofPlan::len);
                if o.statement_count != replayed {
                    return Err(ReplayError::StatementCount {
                        recorded: o.statement_count,
                        replayed,
                    });
                }
            }
            Record::Header(_) | Record::Event { .. } | Record::Usage(_) => {}
        }
    }
    Ok(ReplayReport {
        frames_checked,
        diffs_applied,
        final_plan_size: plan.as_ref().map_or(0, ProofPlan::len),
        final_revision: plan.as_ref().map_or(0, ProofPlan::revision),
    })
}

fn strip(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            for f in VOLATILE_FIELDS {
                map.remove(*f);
            }
            map.values_mut().for_each(strip);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip),
        _ => {}
    }
}

/// JSON Lines with [`VOLATILE_FIELDS`] removed everywhere.
pub fn strip_volatile(ledger: &RunLedger) -> String {
    let mut out = String::new();
    for r in &ledger.records {
        let mut v = serde_json::to_value(r).expect("records serialize");
        strip(&mut v);
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}
