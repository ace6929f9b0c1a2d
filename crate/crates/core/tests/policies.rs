mod common;

use common::values;
use mellow_core::ops::{self, mellowmax};
use mellow_core::policies::{beta_residual, mellowmax_policy, solve_beta, solve_policy_by_convex_program};
use mellow_core::ActionDistribution;
use proptest::prelude::*;

const ORACLE_ITERS: usize = 500;

fn tv(p: &ActionDistribution, q: &ActionDistribution) -> f64 {
    p.total_variation(q)
}

fn row() -> impl Strategy<Value = Vec<f64>> {
    values(2..=5, 10.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn full_support_and_expectation(q in row(), omega in 1e-6..=50.0f64) {
        let pi = mellowmax_policy(&q, omega).unwrap();
        prop_assert!(pi.probs().iter().all(|&p| p > 0.0), "{:?}", pi.probs());
        prop_assert!((pi.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!((pi.expectation(&q) - mellowmax(&q, omega)).abs() <= 1e-8);
    }

    #[test]
    fn shift_invariance(q in row(), omega in 1e-3..=50.0f64, c in -10.0..10.0f64) {
        let shifted: Vec<f64> = q.iter().map(|v| v + c).collect();
        let (a, b) = (mellowmax_policy(&q, omega).unwrap(), mellowmax_policy(&shifted, omega).unwrap());
        prop_assert!(a.probs().iter().zip(b.probs()).all(|(x, y)| (x - y).abs() <= 1e-10), "{:?} vs {:?}", a, b);
    }

    #[test]
    fn root_function_is_nondecreasing(q in row(), target in -10.0..10.0f64) {
        let grid: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.25).collect();
        for w in grid.windows(2) {
            prop_assert!(beta_residual(&q, target, w[1]) >= beta_residual(&q, target, w[0]) - 1e-12);
        }
    }

    #[test]
    fn agrees_with_convex_oracle(q in row(), omega in 1e-3..=50.0f64) {
        prop_assume!(ops::max(&q) - ops::min(&q) > 1e-6);
        let root = mellowmax_policy(&q, omega).unwrap();
        let oracle = solve_policy_by_convex_program(&q, omega, ORACLE_ITERS).unwrap();
        prop_assert!(tv(&root, &oracle) <= 1e-5, "{:?} vs {:?}", root, oracle);
    }

    #[test]
    fn large_omega_concentrates_on_a_separated_max(q in row()) {
        let omega = 1e3;
        let mut sorted = q.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let gap = sorted[0] - sorted[1];
        // the mass off the argmax is at most (max - mm) / gap <= ln(n) / (omega gap)
        prop_assume!(gap >= 0.1 && gap >= 100.0 * (q.len() as f64).ln() / omega);
        let pi = mellowmax_policy(&q, omega).unwrap();
        prop_assert!(pi.probs()[ops::argmax(&q)] >= 0.99, "{:?}", pi.probs());
    }

    #[test]
    fn two_actions_concentrate_at_gap_one_tenth(a in -10.0..10.0f64, gap in 0.1..5.0f64) {
        let pi = mellowmax_policy(&[a, a - gap], 1e3).unwrap();
        prop_assert!(pi.probs()[0] >= 0.99);
    }

    #[test]
    fn small_omega_is_near_uniform(q in row()) {
        let pi = mellowmax_policy(&q, 1e-3).unwrap();
        let p = pi.probs();
        prop_assert!(ops::max(p) - ops::min(p) <= 0.01);
    }
}

#[test]
fn constant_rows_are_uniform() {
    let pi = mellowmax_policy(&[2.0; 4], 5.0).unwrap();
    assert_eq!(pi.probs(), &[0.25; 4]);
    assert!(solve_beta(&[2.0; 4], 5.0).is_err());
}

#[test]
fn two_action_closed_form() {
    let q = [0.0, 1.0];
    let beta = solve_beta(&q, 5.0).unwrap();
    let pi = mellowmax_policy(&q, 5.0).unwrap();
    let e = beta.exp();
    assert!((pi.probs()[1] - e / (1.0 + e)).abs() <= 1e-12);
    assert!((pi.expectation(&q) - mellowmax(&q, 5.0)).abs() <= 1e-10);
    let oracle = solve_policy_by_convex_program(&q, 5.0, 200).unwrap();
    assert!(tv(&pi, &oracle) <= 1e-5);
}

#[test]
fn entropy_is_locally_maximal() {
    let q = [1.0, 2.0, 3.0];
    let pi = mellowmax_policy(&q, 2.0).unwrap();
    // directions preserving both the total mass and the expectation
    let d = [1.0, -2.0, 1.0];
    for t in [1e-3, -1e-3, 1e-2, -1e-2] {
        let probs: Vec<f64> = pi.probs().iter().zip(d).map(|(p, d)| p + t * d).collect();
        let moved = ActionDistribution::new(probs);
        assert!((moved.expectation(&q) - pi.expectation(&q)).abs() < 1e-12);
        assert!(moved.entropy() < pi.entropy());
    }
}
