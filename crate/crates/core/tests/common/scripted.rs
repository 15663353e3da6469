//! Builders for small scripted runs against the simulated verifier.

use std::path::Path;

use proofloop::agents::{AgentBackend, CheckKind, Fixture, FixtureEntry, ScriptedBackend, TaskKind};
use proofloop::leanenv::{SimRules, SimVerifier};
use proofloop::ledger::{LedgerWriter, RunLedger};
use proofloop::looper::{parse_input, run, EventKind, RunOptions, RunOutcome};
use proofloop::plan::{DiffCause, PlanDiff, PlanNode, Rewrite, StatementId};

pub const INPUT: &str = "theorem goal (n : Nat) : n + 0 = n := by\n  sorry\n";

pub fn entry(kind: TaskKind, node: Option<&str>) -> FixtureEntry {
    FixtureEntry {
        kind,
        check: None,
        node: node.map(StatementId::from),
        occurrence: 0,
        repeat: 1,
        usage: None,
        pass: None,
        note: None,
        source: None,
        diff: None,
    }
}

pub fn lean(node: &str, occurrence: u32, source: &str) -> FixtureEntry {
    FixtureEntry {
        occurrence,
        source: Some(source.into()),
        ..entry(TaskKind::LeanWork, Some(node))
    }
}

pub fn check(node: &str, kind: CheckKind, occurrence: u32, pass: bool) -> FixtureEntry {
    FixtureEntry {
        check: Some(kind),
        occurrence,
        pass: Some(pass),
        ..entry(TaskKind::Check, Some(node))
    }
}

pub fn initial(nodes: Vec<PlanNode>) -> FixtureEntry {
    let mut diff = PlanDiff::new(DiffCause::InitialPlan);
    diff.adds = nodes;
    FixtureEntry {
        diff: Some(diff),
        ..entry(TaskKind::PlanInitial, None)
    }
}

pub fn revise(node: &str, occurrence: u32, diff: PlanDiff) -> FixtureEntry {
    FixtureEntry {
        occurrence,
        diff: Some(diff),
        ..entry(TaskKind::PlanRevise, Some(node))
    }
}

pub struct Run {
    pub outcome: RunOutcome,
    pub ledger: RunLedger,
    pub ws: tempfile::TempDir,
}

pub fn go(entries: Vec<FixtureEntry>, opts: &RunOptions) -> Run {
    let mut backend = ScriptedBackend::new(Fixture::from_entries(entries).unwrap());
    go_with(&mut backend, opts)
}

pub fn go_with(backend: &mut dyn AgentBackend, opts: &RunOptions) -> Run {
    let input = parse_input(Path::new("goal.lean"), INPUT.into(), None).unwrap();
    let ws = tempfile::tempdir().unwrap();
    let verifier = SimVerifier::new(SimRules::default());
    let (outcome, ledger) = run(&input, backend, &verifier, opts, ws.path(), LedgerWriter::in_memory()).unwrap();
    Run {
        outcome,
        ledger,
        ws,
    }
}

pub fn kinds(ledger: &RunLedger) -> Vec<EventKind> {
    ledger.events().map(|e| e.kind).collect()
}

pub const CLEAN: &str = "theorem goal (n : Nat) : n + 0 = n := by\n  simp\n";
pub const SORRY: &str = "theorem goal (n : Nat) : n + 0 = n := by\n  sorry\n";

/// Every node builds with a sorry, passes Math and gets split by one new
/// helper, forever.
pub fn splitting_forever(levels: usize) -> Vec<FixtureEntry> {
    let name = |i: usize| if i == 0 { "T".to_string() } else { format!("H{i}") };
    let mut out = vec![initial(vec![PlanNode::new("T", "goal")])];
    for i in 0..levels {
        let n = name(i);
        out.push(lean(&n, 0, SORRY));
        out.push(check(&n, CheckKind::Math, 0, true));
        out.push(check(&n, CheckKind::Decomposition, 0, false));
        let mut diff = PlanDiff::new(DiffCause::DecompositionSplit);
        diff.adds = vec![PlanNode::new(name(i + 1), format!("helper {}", i + 1))];
        diff.rewrites = vec![Rewrite {
            id: n.as_str().into(),
            informal: None,
            sketch: None,
            deps: Some(vec![name(i + 1).into()]),
        }];
        out.push(revise(&n, 0, diff));
    }
    out
}
