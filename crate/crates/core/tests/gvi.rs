mod common;

use common::small_mdp;
use mellow_core::domains::{example_mdp, EXAMPLE_TRACKED};
use mellow_core::gvi::{gvi_sweep, run_gvi, GviConfig, SweepOrder};
use mellow_core::{Mdp, Operator, QTable};
use proptest::prelude::*;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (x, p) in a[row].iter_mut().zip(&pivot_row).skip(col) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// Optimal action values by evaluating every deterministic stationary policy.
fn exhaustive_optimum(mdp: &Mdp) -> QTable {
    let (n, m, gamma) = (mdp.n_states(), mdp.n_actions(), mdp.gamma());
    let mut best = vec![f64::NEG_INFINITY; n];
    for code in 0..m.pow(n as u32) {
        let policy: Vec<usize> = (0..n).map(|s| code / m.pow(s as u32) % m).collect();
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for s in 0..n {
            a[s][s] = 1.0;
            if mdp.is_terminal(s) {
                continue;
            }
            b[s] = mdp.expected_reward(s, policy[s]).unwrap();
            for (next, p) in mdp.transition_row(s, policy[s]).iter().enumerate() {
                if !mdp.is_terminal(next) {
                    a[s][next] -= gamma * p;
                }
            }
        }
        for (v, best) in solve(a, b).into_iter().zip(&mut best) {
            *best = best.max(v);
        }
    }
    let mut q = QTable::zeros(mdp);
    for s in (0..n).filter(|&s| !mdp.is_terminal(s)) {
        for a in 0..m {
            let future: f64 = mdp
                .transition_row(s, a)
                .iter()
                .enumerate()
                .filter(|(next, _)| !mdp.is_terminal(*next))
                .map(|(next, p)| p * best[next])
                .sum();
            q.set(s, a, mdp.expected_reward(s, a).unwrap() + gamma * future);
        }
    }
    q
}

fn non_expansion() -> impl Strategy<Value = Operator> {
    prop_oneof![
        Just(Operator::Max),
        Just(Operator::Mean),
        (0.0..=1.0f64).prop_map(Operator::Eps),
        (1e-3..50.0f64).prop_map(Operator::Mellowmax),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sweeps_contract(mdp in small_mdp(5, 3), op in non_expansion()) {
        let r = run_gvi(&mdp, &QTable::zeros(&mdp), &op, &GviConfig::new(1e-10, 2000)).unwrap();
        prop_assert!(r.converged);
        for w in r.diff_trace.windows(2) {
            prop_assert!(w[1] <= mdp.gamma() * w[0] + 1e-12, "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn converged_tables_are_nearly_fixed(mdp in small_mdp(5, 3), op in non_expansion(), in_place in any::<bool>()) {
        let order = if in_place { SweepOrder::InPlace } else { SweepOrder::Synchronous };
        let cfg = GviConfig::new(1e-6, 5000).with_order(order);
        let r = run_gvi(&mdp, &QTable::zeros(&mdp), &op, &cfg).unwrap();
        prop_assert!(r.converged);
        let (_, residual) = gvi_sweep(&mdp, &r.final_q, &op).unwrap();
        // an in-place run stops on its own sweep, which can lag a synchronous one by a factor 1/(1-gamma)
        let bound = if in_place { cfg.delta / (1.0 - mdp.gamma()) } else { cfg.delta };
        prop_assert!(residual < bound, "{residual}");
    }

    #[test]
    fn max_matches_policy_enumeration(mdp in small_mdp(3, 3)) {
        let r = run_gvi(&mdp, &QTable::zeros(&mdp), &Operator::Max, &GviConfig::new(1e-10, 5000)).unwrap();
        let oracle = exhaustive_optimum(&mdp);
        prop_assert!(r.final_q.max_abs_diff(&oracle) <= 1e-6, "{:?} vs {:?}", r.final_q, oracle);
    }

    #[test]
    fn runs_are_deterministic(mdp in small_mdp(4, 3), beta in 0.0..30.0f64) {
        let cfg = GviConfig::default();
        let op = Operator::Boltz(beta);
        prop_assert_eq!(
            run_gvi(&mdp, &QTable::zeros(&mdp), &op, &cfg).unwrap(),
            run_gvi(&mdp, &QTable::zeros(&mdp), &op, &cfg).unwrap()
        );
    }
}

#[test]
fn boltzmann_reaches_two_fixed_points_from_two_starts() {
    let mdp = example_mdp();
    let cfg = GviConfig::new(1e-10, 100_000);
    let op = Operator::Boltz(16.55);
    let from = |v: f64| {
        let mut q = QTable::zeros(&mdp);
        for &(s, a) in &EXAMPLE_TRACKED {
            q.set(s, a, v);
        }
        run_gvi(&mdp, &q, &op, &cfg).unwrap()
    };
    let (low, high) = (from(0.0), from(1.0));
    assert!(low.converged && high.converged);
    assert!(low.final_q.max_abs_diff(&high.final_q) > 0.1);
    for r in [low, high] {
        let (_, residual) = gvi_sweep(&mdp, &r.final_q, &op).unwrap();
        assert!(residual < 1e-9);
    }
}

#[test]
fn mellowmax_reaches_one_fixed_point_from_the_same_starts() {
    let mdp = example_mdp();
    let cfg = GviConfig::new(1e-10, 100_000);
    let op = Operator::Mellowmax(16.55);
    let ends: Vec<QTable> = [0.0, 1.0]
        .iter()
        .map(|&v| {
            let mut q = QTable::zeros(&mdp);
            for &(s, a) in &EXAMPLE_TRACKED {
                q.set(s, a, v);
            }
            run_gvi(&mdp, &q, &op, &cfg).unwrap().final_q
        })
        .collect();
    assert!(ends[0].max_abs_diff(&ends[1]) < 1e-8);
}
