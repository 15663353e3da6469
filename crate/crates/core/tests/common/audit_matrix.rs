//! Twelve workspaces, each flipping one solved-condition component.

use std::collections::BTreeSet;

use proofloop::leanenv::{audit_verdict, default_permitted, SimRule, SimRules, SimVerifier, Workspace, SORRY_AX};
use proofloop::plan::{AnchorDecl, StatementId};

pub struct Case {
    pub name: &'static str,
    pub axioms: &'static [&'static str],
    pub target_body: &'static str,
    pub helper_body: &'static str,
    /// Ground truth per component: axioms permitted, sorryAx absent, no
    /// forbidden token, signature preserved.
    pub truth: [bool; 4],
}

const SIG: &str = "theorem t (n : Nat) : n + 0 = n";
const TARGET: &str = "theorem t (n : Nat) : n + 0 = n := by\n  simp\n";
const HELPER: &str = "theorem h : True := by\n  trivial\n";
const ALL: &[&str] = &["propext", "Quot.sound", "Classical.choice"];

pub fn cases() -> Vec<Case> {
    let c = |name, axioms, target_body, helper_body, truth| Case {
        name,
        axioms,
        target_body,
        helper_body,
        truth,
    };
    vec![
        c("all three permitted axioms", ALL, TARGET, HELPER, [true; 4]),
        c("no axioms at all", &[], TARGET, HELPER, [true; 4]),
        c("strict subset of permitted", &["propext"], TARGET, HELPER, [true; 4]),
        c(
            "signature reflowed over lines",
            ALL,
            "theorem t\n    (n : Nat) :\n    n + 0 = n := by\n  simp\n",
            HELPER,
            [true; 4],
        ),
        c("user axiom in closure", &["propext", "my_choice"], TARGET, HELPER, [false, true, true, true]),
        c("native reduction axiom", &["Lean.ofReduceBool"], TARGET, HELPER, [false, true, true, true]),
        c("sorryAx in closure", &["propext", SORRY_AX], TARGET, HELPER, [true, false, true, true]),
        c(
            "sorry in helper file",
            ALL,
            TARGET,
            "theorem h : True := by\n  sorry\n",
            [true, true, false, true],
        ),
        c(
            "admit in target file",
            ALL,
            "theorem t (n : Nat) : n + 0 = n := by\n  admit\n",
            HELPER,
            [true, true, false, true],
        ),
        c(
            "axiom declaration in helper",
            ALL,
            TARGET,
            "axiom cheat : False\ntheorem h : True := by\n  trivial\n",
            [true, true, false, true],
        ),
        c(
            "weakened conclusion",
            ALL,
            "theorem t (n : Nat) : n = n := by\n  rfl\n",
            HELPER,
            [true, true, true, false],
        ),
        c(
            "target renamed",
            ALL,
            "theorem t' (n : Nat) : n + 0 = n := by\n  simp\n",
            HELPER,
            [true, true, true, false],
        ),
    ]
}

/// Runs one case; returns (expected pass, actual pass, audit details).
pub fn run_case(case: &Case) -> (bool, bool, Vec<String>) {
    // Independent verdict from the ground-truth flags, plus a direct check
    // of the axiom set against the permitted names.
    let permitted: BTreeSet<&str> = ALL.iter().copied().collect();
    let subset = case.axioms.iter().all(|a| *a == SORRY_AX || permitted.contains(a));
    let no_sorry_ax = !case.axioms.contains(&SORRY_AX);
    assert_eq!([subset, no_sorry_ax], [case.truth[0], case.truth[1]], "case `{}` mislabelled", case.name);
    let expected = case.truth.iter().all(|b| *b);

    let dir = tempfile::tempdir().unwrap();
    let target = StatementId::from("Thm_T");
    let anchor = AnchorDecl {
        decl_name: "t".into(),
        signature: SIG.into(),
        original_body: "by\n  sorry".into(),
    };
    let mut ws = Workspace::create(dir.path(), target.clone(), anchor.clone(), "leanprover/lean4:stable", None).unwrap();
    ws.write_node(&target, &format!("-- sim-key: target\n{}", case.target_body))
        .unwrap();
    ws.write_node(&StatementId::from("Lem_H"), &format!("-- sim-key: helper\n{}", case.helper_body))
        .unwrap();
    let rules = SimRules::from_rules([
        SimRule {
            key: "target".into(),
            axioms: case.axioms.iter().map(|s| s.to_string()).collect(),
            ..SimRule::default()
        },
        SimRule {
            key: "helper".into(),
            ..SimRule::default()
        },
    ]);
    let report = audit_verdict(&ws, &anchor, &SimVerifier::new(rules), &default_permitted());
    (expected, report.pass, report.details)
}
