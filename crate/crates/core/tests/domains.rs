use mellow_core::domains::{derive_seed, random_mdp, RandomMdpConfig, TaxiConfig, TaxiEnv, TAXI_LAYOUT};
use mellow_core::sarsa::EpisodicEnv;
use mellow_core::Mdp;
use proptest::prelude::*;

const SEEDS: u64 = 1000;

fn chi_square(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

#[test]
fn heavy_noise_hits_about_a_tenth_of_entries() {
    let cfg = RandomMdpConfig::default();
    let (mut hits, mut entries) = (0, 0);
    for seed in 0..SEEDS {
        let (_, diag) = random_mdp(&cfg, derive_seed(7, seed)).unwrap();
        hits += diag.noise2_hits;
        entries += diag.entries;
    }
    let fraction = hits as f64 / entries as f64;
    assert!((fraction - 0.1).abs() <= 0.02, "{fraction}");
}

#[test]
fn sizes_are_uniform() {
    let cfg = RandomMdpConfig::default();
    let mut states = vec![0; cfg.states.1 - cfg.states.0 + 1];
    let mut actions = vec![0; cfg.actions.1 - cfg.actions.0 + 1];
    for seed in 0..SEEDS {
        let (mdp, _) = random_mdp(&cfg, derive_seed(3, seed)).unwrap();
        states[mdp.n_states() - cfg.states.0] += 1;
        actions[mdp.n_actions() - cfg.actions.0] += 1;
    }
    // 0.1% critical values for 8 and 3 degrees of freedom
    assert!(chi_square(&states) < 26.12, "{states:?}");
    assert!(chi_square(&actions) < 16.27, "{actions:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_mdps_validate(seed in any::<u64>()) {
        let (mdp, _) = random_mdp(&RandomMdpConfig::default(), seed).unwrap();
        let rebuilt = Mdp::new(
            mdp.n_states(), mdp.n_actions(), mdp.transition().to_vec(), mdp.reward().to_vec(), mdp.gamma(), mdp.terminals(),
        );
        prop_assert!(rebuilt.is_ok());
        let (lo, hi) = mdp.reward_bounds();
        prop_assert!(lo >= 0.0);
        prop_assert!(hi == 0.5);
    }

    #[test]
    fn generation_is_seed_stable(seed in any::<u64>()) {
        let cfg = RandomMdpConfig::default();
        prop_assert_eq!(random_mdp(&cfg, seed).unwrap(), random_mdp(&cfg, seed).unwrap());
    }

    #[test]
    fn taxi_state_count_matches_layout(
        cells in prop::collection::vec(prop::sample::select(vec!['.', '.', '.', '#', 'F']), 8..30),
        width in 3usize..6,
    ) {
        let mut grid: Vec<char> = cells;
        grid.insert(0, 'S');
        grid.push('D');
        let passengers = grid.iter().filter(|&&c| c == 'F').count();
        prop_assume!(passengers <= 4);
        let open = grid.iter().filter(|&&c| c != '#').count();
        let layout: String = grid.chunks(width).map(|row| row.iter().collect::<String>() + "\n").collect();
        let rewards = (0..=passengers).map(|k| k as f64).collect();
        let env = TaxiEnv::new(&TaxiConfig { layout, gamma: 0.9, delivery_rewards: rewards }).unwrap();
        prop_assert_eq!(env.n_states(), open << passengers);
        prop_assert_eq!(env.to_mdp().n_states(), env.n_states());
    }
}

#[test]
fn default_taxi_size() {
    let env = TaxiEnv::new(&TaxiConfig::default()).unwrap();
    let open = TAXI_LAYOUT.chars().filter(|c| matches!(c, '.' | 'S' | 'D' | 'F')).count();
    let passengers = TAXI_LAYOUT.matches('F').count();
    assert_eq!((open, passengers), (33, 3));
    assert_eq!(env.n_states(), open * 8);
}
