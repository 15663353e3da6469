mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use common::oracle;
use proofloop::agents::TokenUsage;
use proofloop::leanenv::{normalize, scan_source};
use proofloop::ledger::{aggregate_stats, depth_layout, CostModel, RunSummary};
use proofloop::plan::{parse_plan, render_plan, PlanDiff, ProofPlan};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn invalidation_matches_reachability_oracle(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let plan = ProofPlan::create(oracle::random_dag(&mut rng, 50)).unwrap();
        let diff = oracle::random_diff(&mut rng, &plan);
        let applied = plan.apply_diff(&diff).unwrap();
        let expected = oracle::invalidation_oracle(&plan, applied.plan.nodes(), &diff);
        prop_assert_eq!(&applied.invalidated, &expected);
        prop_assert_eq!(applied.plan.revision(), plan.revision() + 1);
        for id in &diff.removes {
            prop_assert!(applied.plan.retired().contains(id));
        }
    }

    #[test]
    fn empty_diff_invalidates_nothing(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let plan = ProofPlan::create(oracle::random_dag(&mut rng, 30)).unwrap();
        let applied = plan.apply_diff(&PlanDiff::new(proofloop::plan::DiffCause::MathFail)).unwrap();
        prop_assert!(applied.invalidated.is_empty());
        prop_assert_eq!(applied.plan.order(), plan.order());
    }

    #[test]
    fn scanner_matches_char_level_oracle(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (src, built) = oracle::random_lean_file(&mut rng);
        let got: Vec<(String, usize)> =
            scan_source(&src).into_iter().map(|(t, l)| (t.as_str().to_owned(), l)).collect();
        prop_assert_eq!(&got, &oracle::char_oracle(&src), "source:\n{}", src);
        prop_assert_eq!(&got, &built, "source:\n{}", src);
    }
}

proptest! {
    #![proptest_config(config(500))]

    #[test]
    fn depth_layout_is_longest_path(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let frame = oracle::random_frame(&mut rng, 40);
        prop_assert_eq!(depth_layout(&frame).unwrap(), oracle::longest_path_oracle(&frame));
    }

    #[test]
    fn plan_format_round_trips(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let plan = ProofPlan::create(oracle::random_dag(&mut rng, 20)).unwrap();
        let text = render_plan(&plan);
        let back = parse_plan(&text).unwrap();
        prop_assert_eq!(back.nodes(), plan.nodes());
        prop_assert_eq!(render_plan(&back), text);
    }

    #[test]
    fn topological_order_respects_edges(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let plan = ProofPlan::create(oracle::random_dag(&mut rng, 40)).unwrap();
        for (d, n) in plan.edges() {
            prop_assert!(plan.position(&d).unwrap() < plan.position(&n).unwrap());
        }
        prop_assert_eq!(plan.nodes().iter().filter(|n| n.anchor.is_some()).count(), 1);
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn stats_match_two_pass_formulas(
        runs in prop::collection::vec((1u64..50_000_000, 1usize..200), 1..40)
    ) {
        let summaries: Vec<RunSummary> = runs
            .iter()
            .map(|&(ms, s)| RunSummary {
                wall_clock: std::time::Duration::from_millis(ms),
                statements: s,
                solved: true,
            })
            .collect();
        let st = aggregate_stats(&summaries).unwrap();
        let hours: Vec<f64> = runs.iter().map(|&(ms, _)| ms as f64 / 1000.0 / 3600.0).collect();
        let stmts: Vec<f64> = runs.iter().map(|&(_, s)| s as f64).collect();
        let mps: Vec<f64> = runs.iter().map(|&(ms, s)| ms as f64 / 1000.0 / 60.0 / s as f64).collect();
        let tol = 1e-9;
        prop_assert!(oracle::rel_close(st.mean_time, oracle::mean(&hours), tol));
        prop_assert!((st.std_time - oracle::sample_std(&hours)).abs() <= tol * oracle::mean(&hours));
        prop_assert!(oracle::rel_close(st.median_time, oracle::median(&hours), tol));
        prop_assert!(oracle::rel_close(st.mean_statements, oracle::mean(&stmts), tol));
        prop_assert!((st.std_statements - oracle::sample_std(&stmts)).abs() <= tol * oracle::mean(&stmts));
        prop_assert!(oracle::rel_close(st.mean_min_per_statement, oracle::mean(&mps), tol));
        prop_assert!(
            (st.std_min_per_statement - oracle::sample_std(&mps)).abs() <= tol * oracle::mean(&mps)
        );
        prop_assert!(st.min_time <= st.median_time && st.median_time <= st.max_time);
    }

    #[test]
    fn normalize_is_idempotent(s in "[ \t\n()a-z:⟨⟩\\[\\]{}=→,]{0,60}") {
        let once = normalize(&s);
        prop_assert_eq!(normalize(&once), once.clone());
        prop_assert!(!once.contains("  "));
        prop_assert_eq!(once.trim(), once.as_str());
    }

    #[test]
    fn exact_cost_is_additive(
        a in (0u64..10_000_000, 0u64..1_000_000, 0u64..50_000_000, 0u64..5_000_000),
        b in (0u64..10_000_000, 0u64..1_000_000, 0u64..50_000_000, 0u64..5_000_000),
    ) {
        let model = CostModel::per_million(5.0, 25.0, 0.5, 6.25);
        let u = |t: (u64, u64, u64, u64)| TokenUsage {
            prompt_tokens: t.0,
            completion_tokens: t.1,
            cache_read_tokens: t.2,
            cache_write_tokens: t.3,
        };
        let sum = u((a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3));
        prop_assert_eq!(model.cost_exact(&sum), model.cost_exact(&u(a)) + model.cost_exact(&u(b)));
        // Rounded costs drift by at most one cent.
        let drift = model.cost(&sum).cents() - (model.cost(&u(a)).cents() + model.cost(&u(b)).cents());
        prop_assert!(drift.abs() <= 1);
        // Independent reference: rates are whole 1e-4 USD per million tokens.
        let reference = a.0 as u128 * 50_000 + a.1 as u128 * 250_000 + a.2 as u128 * 5_000 + a.3 as u128 * 62_500;
        prop_assert_eq!(model.cost_exact(&u(a)), reference);
    }
}

#[test]
fn invalidation_spot_check_added_nodes_never_reported() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..200 {
        let plan = ProofPlan::create(oracle::random_dag(&mut rng, 25)).unwrap();
        let diff = oracle::random_diff(&mut rng, &plan);
        let added: BTreeSet<_> = diff.adds.iter().map(|n| n.id.clone()).collect();
        let applied = plan.apply_diff(&diff).unwrap();
        assert!(applied.invalidated.is_disjoint(&added));
    }
}
