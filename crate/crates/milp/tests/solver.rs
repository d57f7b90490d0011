mod oracle;

use gridplan_milp::{
    evaluate_point, solve_lp, solve_milp, solve_milp_with_hint, write_lp, LpStatus, MilpError, MilpModel,
    MilpStatus, Sense, SolverConfig, VarKind,
};
use proptest::prelude::*;

fn knapsack() -> MilpModel {
    // max 5a + 4b + 3c  s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11
    let mut m = MilpModel::new("knap");
    let a = m.add_binary("a");
    let b = m.add_binary("b");
    let c = m.add_binary("c");
    m.set_obj(a, -5.0);
    m.set_obj(b, -4.0);
    m.set_obj(c, -3.0);
    m.add_constraint("w", [(a, 2.0), (b, 3.0), (c, 1.0)], Sense::Le, 5.0);
    m.add_constraint("v", [(a, 4.0), (b, 1.0), (c, 2.0)], Sense::Le, 11.0);
    m
}

#[test]
fn knapsack_optimum() {
    let s = solve_milp(&knapsack(), &SolverConfig::default()).unwrap();
    assert_eq!(s.status, MilpStatus::Optimal);
    assert!((s.objective + 9.0).abs() < 1e-9, "{}", s.objective);
    assert!(s.gap() < 1e-9);
    assert!(s.max_violation < 1e-9);
}

#[test]
fn lp_relaxation_of_knapsack() {
    let s = solve_lp(&knapsack()).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    // a = c = 1, b = 2/3
    assert!((s.objective + 32.0 / 3.0).abs() < 1e-9, "{}", s.objective);
}

#[test]
fn integer_rounding_matters() {
    // min -x - y, 2x + 2y <= 3, x,y in {0..3}: LP gives 1.5, integers give 1
    let mut m = MilpModel::new("round");
    let x = m.add_var("x", 0.0, 3.0, VarKind::Integer);
    let y = m.add_var("y", 0.0, 3.0, VarKind::Integer);
    m.set_obj(x, -1.0);
    m.set_obj(y, -1.0);
    m.add_constraint("c", [(x, 2.0), (y, 2.0)], Sense::Le, 3.0);
    let lp = solve_lp(&m).unwrap();
    assert!((lp.objective + 1.5).abs() < 1e-9);
    let s = solve_milp(&m, &SolverConfig::default()).unwrap();
    assert!((s.objective + 1.0).abs() < 1e-9);
    assert!(s.bound <= s.objective + 1e-9);
}

#[test]
fn infeasible_and_unbounded() {
    let mut m = MilpModel::new("inf");
    let x = m.add_binary("x");
    m.add_constraint("c", [(x, 1.0)], Sense::Ge, 2.0);
    assert_eq!(solve_milp(&m, &SolverConfig::default()).unwrap().status, MilpStatus::Infeasible);
    assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Infeasible);

    let mut u = MilpModel::new("unb");
    let y = u.add_continuous("y", 0.0, f64::INFINITY);
    u.set_obj(y, -1.0);
    assert_eq!(solve_lp(&u).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn offset_and_equality_rows() {
    let mut m = MilpModel::new("eq");
    let x = m.add_continuous("x", 0.0, 10.0);
    let b = m.add_binary("b");
    m.obj_offset = 2.5;
    m.set_obj(x, 1.0);
    m.set_obj(b, 3.0);
    m.add_constraint("e", [(x, 1.0), (b, 4.0)], Sense::Eq, 6.0);
    let s = solve_milp(&m, &SolverConfig::default()).unwrap();
    // b = 1 costs 3 + 2, b = 0 costs 6
    assert!((s.objective - 7.5).abs() < 1e-9, "{}", s.objective);
    assert!((s.x[b.idx()] - 1.0).abs() < 1e-9);
}

#[test]
fn hint_is_used_and_wrong_hint_is_harmless() {
    let m = knapsack();
    for hint in [vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 1.0], vec![0.2]] {
        let s = solve_milp_with_hint(&m, &SolverConfig::default(), Some(&hint)).unwrap();
        assert!((s.objective + 9.0).abs() < 1e-9);
    }
}

#[test]
fn node_limit_keeps_a_valid_bound() {
    let m = oracle::random_model(7, 12, 2, 6);
    let cfg = SolverConfig {
        node_limit: 3,
        dive_interval: 0,
        ..SolverConfig::default()
    };
    let s = solve_milp(&m, &cfg).unwrap();
    let opt = oracle::enumerate_milp(&m).unwrap();
    assert!(s.bound <= opt + 1e-7);
    if s.status.has_solution() {
        assert!(s.objective >= opt - 1e-7);
    }
}

#[test]
fn validation_errors() {
    let mut m = MilpModel::new("bad");
    let x = m.add_continuous("x", 1.0, 0.0);
    m.set_obj(x, 1.0);
    assert!(matches!(solve_lp(&m), Err(MilpError::Invalid(_))));
    let mut n = MilpModel::new("bad2");
    n.add_var("k", 0.0, f64::INFINITY, VarKind::Integer);
    assert!(matches!(solve_milp(&n, &SolverConfig::default()), Err(MilpError::Invalid(_))));
}

#[test]
fn repeated_terms_merge() {
    let mut m = MilpModel::new("merge");
    let x = m.add_continuous("x", 0.0, 1.0);
    m.add_constraint("c", [(x, 1.0), (x, 2.0)], Sense::Le, 3.0);
    m.add_constraint("z", [(x, 1.0), (x, -1.0)], Sense::Le, 3.0);
    assert_eq!(m.cons[0].terms, vec![(x, 3.0)]);
    assert!(m.cons[1].terms.is_empty());
}

#[test]
fn point_evaluation_reports_worst_row() {
    let m = knapsack();
    let e = evaluate_point(&m, &[1.0, 1.0, 1.0], 1e-9);
    assert!((e.max_violation - 1.0).abs() < 1e-12);
    assert_eq!(e.worst.as_deref(), Some("w"));
    assert!(!e.feasible(1e-6));
    let f = evaluate_point(&m, &[1.0, 0.5, 0.0], 1e-9);
    assert!(!f.integral);
    assert!(evaluate_point(&m, &[1.0, 0.0, 1.0], 1e-9).feasible(1e-9));
}

#[test]
fn lp_dump_lists_sections() {
    let text = write_lp(&knapsack());
    for part in ["Minimize", "Subject To", "Binaries", "End"] {
        assert!(text.contains(part), "{}", text);
    }
}

#[test]
fn solves_are_deterministic() {
    let m = oracle::random_model(11, 10, 3, 7);
    let a = solve_milp(&m, &SolverConfig::default()).unwrap();
    let b = solve_milp(&m, &SolverConfig::default()).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.nodes, b.nodes);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn milp_matches_enumeration(seed in 0u64..1_000_000, nbin in 1usize..=10, ncont in 0usize..=2, rows in 1usize..=6) {
        let m = oracle::random_model(seed, nbin, ncont, rows);
        let s = solve_milp(&m, &SolverConfig::default()).unwrap();
        let opt = oracle::enumerate_milp(&m).expect("generated models are feasible");
        prop_assert_eq!(s.status, MilpStatus::Optimal);
        prop_assert!((s.objective - opt).abs() <= 1e-6 * (1.0 + opt.abs()), "{} vs {}", s.objective, opt);
        prop_assert!(evaluate_point(&m, &s.x, 1e-6).feasible(1e-6));
        prop_assert!(s.bound <= s.objective + 1e-9);
    }

    #[test]
    fn lp_matches_vertex_enumeration(seed in 0u64..1_000_000, n in 1usize..=4, rows in 1usize..=5) {
        let m = oracle::random_model(seed, 0, n, rows);
        let s = solve_lp(&m).unwrap();
        let opt = oracle::enumerate_lp(&m).expect("generated models are feasible");
        prop_assert_eq!(s.status, LpStatus::Optimal);
        prop_assert!((s.objective - opt).abs() <= 1e-7 * (1.0 + opt.abs()), "{} vs {}", s.objective, opt);
    }

    #[test]
    fn relaxation_bounds_the_milp(seed in 0u64..1_000_000, nbin in 1usize..=8) {
        let m = oracle::random_model(seed, nbin, 2, 4);
        let lp = solve_lp(&m).unwrap();
        let s = solve_milp(&m, &SolverConfig::default()).unwrap();
        prop_assert!(lp.objective <= s.objective + 1e-7);
    }
}
