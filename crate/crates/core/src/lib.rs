//! Recursive plan/prove/check harness for closing `sorry` declarations in
//! Lean 4 files.
//!
//! The crate is split along authority boundaries:
//!
//! * [`plan`] owns the shared proof plan and its invalidation rules.
//! * [`agents`] defines single-objective agent invocations and the scripted
//!   and live backends.
//! * [`looper`] is the control loop that routes build results and check
//!   verdicts.
//! * [`leanenv`] adapts the Lean toolchain (real or simulated) and performs
//!   the final audit.
//! * [`ledger`] records everything the loop does and derives traces, costs
//!   and statistics from it.

pub mod agents;
pub mod leanenv;
pub mod ledger;
pub mod looper;
pub mod plan;

pub use plan::{NodeStatus, PlanDiff, PlanNode, ProofPlan, StatementId};
