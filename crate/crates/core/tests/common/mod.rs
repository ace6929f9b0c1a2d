#![allow(dead_code)]

use mellow_core::Mdp;
use proptest::prelude::*;

pub fn values(len: std::ops::RangeInclusive<usize>, bound: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-bound..bound, len)
}

pub fn pair(len: std::ops::RangeInclusive<usize>, bound: f64) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    len.prop_flat_map(move |n| (prop::collection::vec(-bound..bound, n), prop::collection::vec(-bound..bound, n)))
}

/// Dense MDP with strictly positive transition rows, optionally with the
/// last state terminal.
pub fn small_mdp(max_states: usize, max_actions: usize) -> impl Strategy<Value = Mdp> {
    (1..=max_states, 1..=max_actions, 0.0..0.95f64, any::<bool>()).prop_flat_map(|(n, m, gamma, terminal)| {
        let k = n * m * n;
        (prop::collection::vec(0.01..1.0f64, k), prop::collection::vec(-1.0..1.0f64, k)).prop_map(
            move |(raw, reward)| {
                let transition: Vec<f64> = raw
                    .chunks(n)
                    .flat_map(|row| {
                        let s: f64 = row.iter().sum();
                        row.iter().map(move |x| x / s).collect::<Vec<_>>()
                    })
                    .collect();
                let terminals: Vec<usize> = if terminal && n > 1 { vec![n - 1] } else { vec![] };
                Mdp::new(n, m, transition, reward, gamma, &terminals).expect("valid by construction")
            },
        )
    })
}
