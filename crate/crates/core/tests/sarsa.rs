mod common;

use mellow_core::domains::{example_mdp, EXAMPLE_TRACKED};
use mellow_core::gvi::{run_gvi, GviConfig};
use mellow_core::sarsa::{expected_sarsa_target, run_sarsa, Budget, MdpEnv, SarsaConfig, StepSize};
use mellow_core::{Mdp, Operator, PolicySpec, QTable};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 100_000;

/// One sampled SARSA target `r + gamma Q(s', a')`, or `r` when `s'` ends the episode.
fn sampled_target(mdp: &Mdp, q: &QTable, policy: &PolicySpec, s: usize, a: usize, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random();
    let row = mdp.transition_row(s, a);
    let mut acc = 0.0;
    let next = row
        .iter()
        .position(|p| {
            acc += p;
            u < acc
        })
        .unwrap_or(row.len() - 1);
    let r = mdp.reward_row(s, a)[next];
    if mdp.is_terminal(next) {
        return r;
    }
    let a_next = policy.distribution(q.row(next)).unwrap().sample(rng);
    r + mdp.gamma() * q.get(next, a_next)
}

fn target_second_moment(mdp: &Mdp, q: &QTable, policy: &PolicySpec, s: usize, a: usize) -> f64 {
    let mut total = 0.0;
    for (next, p) in mdp.transition_row(s, a).iter().enumerate() {
        let r = mdp.reward_row(s, a)[next];
        total += if mdp.is_terminal(next) {
            p * r * r
        } else {
            let pi = policy.distribution(q.row(next)).unwrap();
            p * pi.probs().iter().enumerate().map(|(b, w)| w * (r + mdp.gamma() * q.get(next, b)).powi(2)).sum::<f64>()
        };
    }
    total
}

#[test]
fn sampled_targets_average_to_the_expected_target() {
    let mut runner = TestRunner::deterministic();
    let mdps = common::small_mdp(4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for instance in 0..24 {
        let mdp = mdps.new_tree(&mut runner).unwrap().current();
        let Some(s) = (0..mdp.n_states()).find(|&s| !mdp.is_terminal(s)) else { continue };
        let a = rng.random_range(0..mdp.n_actions());
        let values = (0..mdp.n_states() * mdp.n_actions()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let q = QTable::from_values(&mdp, values).unwrap();
        let policy = match instance % 3 {
            0 => PolicySpec::Boltzmann(rng.random_range(0.0..10.0)),
            1 => PolicySpec::Mellowmax(rng.random_range(0.1..10.0)),
            _ => PolicySpec::EpsilonGreedy(rng.random_range(0.0..1.0)),
        };
        let draws: Vec<f64> = (0..DRAWS).map(|_| sampled_target(&mdp, &q, &policy, s, a, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / DRAWS as f64;
        let want = expected_sarsa_target(&mdp, &q, &policy, s, a).unwrap();
        // rare next actions may never be drawn, so the spread comes from the exact distribution
        let se = (target_second_moment(&mdp, &q, &policy, s, a) - want * want).max(0.0).sqrt() / (DRAWS as f64).sqrt();
        assert!((mean - want).abs() <= 3.0 * se + 1e-12, "instance {instance}: {mean} vs {want} (se {se})");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn identical_seeds_give_identical_traces(seed in any::<u64>(), beta in 0.0..20.0f64) {
        let mdp = example_mdp();
        let env = MdpEnv::new(&mdp, 0).unwrap();
        let cfg = SarsaConfig::new(PolicySpec::Boltzmann(beta), 0.1, Budget::Episodes(200), seed).tracking(&EXAMPLE_TRACKED);
        let q0 = QTable::zeros(&mdp);
        prop_assert_eq!(run_sarsa(&env, &q0, &cfg).unwrap(), run_sarsa(&env, &q0, &cfg).unwrap());
    }
}

#[test]
fn decaying_step_size_reaches_the_mellowmax_fixed_point() {
    let mdp = example_mdp();
    let omega = 16.55;
    let fixed = run_gvi(&mdp, &QTable::zeros(&mdp), &Operator::Mellowmax(omega), &GviConfig::new(1e-12, 100_000))
        .unwrap()
        .final_q;
    let env = MdpEnv::new(&mdp, 0).unwrap();
    for seed in 0..5 {
        let cfg = SarsaConfig::new(PolicySpec::Mellowmax(omega), 0.1, Budget::Episodes(20_000), seed)
            .with_step_size(StepSize::Decaying { alpha0: 0.1, t0: 10_000.0 });
        let learned = run_sarsa(&env, &QTable::zeros(&mdp), &cfg).unwrap().final_q;
        let err = EXAMPLE_TRACKED.iter().map(|&(s, a)| (learned.get(s, a) - fixed.get(s, a)).abs()).fold(0.0, f64::max);
        assert!(err <= 0.05, "seed {seed}: {err}");
    }
}
