mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::audit_matrix::{cases, run_case};
use proofloop::leanenv::{audit_verdict, default_permitted, SimRule, SimRules, SimVerifier, Workspace};
use proofloop::plan::{AnchorDecl, StatementId};

#[test]
fn matrix_flips_each_condition_independently() {
    let cases = cases();
    assert_eq!(cases.len(), 12);
    for component in 0..4 {
        assert!(
            cases.iter().any(|c| !c.truth[component] && c.truth.iter().filter(|b| !**b).count() == 1),
            "component {component} is never flipped alone"
        );
    }
    for case in &cases {
        let (expected, actual, details) = run_case(case);
        assert_eq!(actual, expected, "{}: {details:?}", case.name);
        assert_eq!(details.is_empty(), expected, "{}: {details:?}", case.name);
    }
}

fn audit_with_axioms(axioms: &BTreeSet<String>) -> bool {
    let dir = tempfile::tempdir().unwrap();
    let target = StatementId::from("Thm_T");
    let anchor = AnchorDecl {
        decl_name: "t".into(),
        signature: "theorem t : True".into(),
        original_body: "by sorry".into(),
    };
    let mut ws = Workspace::create(dir.path(), target.clone(), anchor.clone(), "leanprover/lean4:stable", None).unwrap();
    ws.write_node(&target, "-- sim-key: k\ntheorem t : True := by\n  trivial\n").unwrap();
    let rules = SimRules::from_rules([SimRule {
        key: "k".into(),
        axioms: axioms.clone(),
        ..SimRule::default()
    }]);
    audit_verdict(&ws, &anchor, &SimVerifier::new(rules), &default_permitted()).pass
}

const POOL: [&str; 6] = ["propext", "Quot.sound", "Classical.choice", "sorryAx", "my_ax", "Lean.ofReduceBool"];

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    /// Growing the axiom closure never turns a failing audit into a pass.
    #[test]
    fn audit_is_monotone_in_axioms(small in 0u8..64, extra in 0u8..64) {
        let pick = |mask: u8| -> BTreeSet<String> {
            POOL.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, s)| s.to_string()).collect()
        };
        let a = pick(small);
        let b: BTreeSet<String> = a.union(&pick(extra)).cloned().collect();
        let (pa, pb) = (audit_with_axioms(&a), audit_with_axioms(&b));
        prop_assert!(!pb || pa);
        prop_assert_eq!(pa, small & 0b111000 == 0);
    }
}
