//! On-policy tabular SARSA and stability diagnostics.

use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::EPISODE_STEP_CAP;
use crate::gvi::backup;
use crate::policies::PolicySpec;
use crate::{Error, Mdp, QTable, Result};

/// Outcome of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub next_state: usize,
    pub terminal: bool,
}

/// An episodic environment with finite state and action sets.
pub trait EpisodicEnv {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn gamma(&self) -> f64;
    /// Start state of a fresh episode.
    fn reset(&self) -> usize;
    /// Samples one transition. Must depend only on its arguments and the
    /// draws taken from `rng`.
    fn step(&self, state: usize, action: usize, rng: &mut dyn RngCore) -> Transition;
}

/// An [`Mdp`] run as an episodic environment by sampling its transition
/// kernel. Episodes start in a fixed state and end on entering a terminal
/// state.
#[derive(Debug, Clone)]
pub struct MdpEnv<'a> {
    mdp: &'a Mdp,
    start: usize,
}

impl<'a> MdpEnv<'a> {
    pub fn new(mdp: &'a Mdp, start: usize) -> Result<Self> {
        if start >= mdp.n_states() {
            return Err(Error::IndexOutOfRange { what: "start state", index: start, bound: mdp.n_states() });
        }
        Ok(Self { mdp, start })
    }

    pub fn mdp(&self) -> &Mdp {
        self.mdp
    }
}

impl EpisodicEnv for MdpEnv<'_> {
    fn n_states(&self) -> usize {
        self.mdp.n_states()
    }

    fn n_actions(&self) -> usize {
        self.mdp.n_actions()
    }

    fn gamma(&self) -> f64 {
        self.mdp.gamma()
    }

    fn reset(&self) -> usize {
        self.start
    }

    fn step(&self, state: usize, action: usize, rng: &mut dyn RngCore) -> Transition {
        use rand::Rng;
        let row = self.mdp.transition_row(state, action);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = row.iter().rposition(|&p| p > 0.0).unwrap_or(state);
        for (s, &p) in row.iter().enumerate() {
            acc += p;
            if p > 0.0 && u < acc {
                next = s;
                break;
            }
        }
        Transition {
            reward: self.mdp.reward_row(state, action)[next],
            next_state: next,
            terminal: self.mdp.is_terminal(next),
        }
    }
}

/// Step-size schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Constant(f64),
    /// `alpha0 / (1 + t / t0)` with `t` the number of updates so far.
    Decaying {
        alpha0: f64,
        t0: f64,
    },
}

impl StepSize {
    fn at(&self, t: u64) -> f64 {
        match *self {
            Self::Constant(a) => a,
            Self::Decaying { alpha0, t0 } => alpha0 / (1.0 + t as f64 / t0),
        }
    }

    fn validate(&self) -> Result<()> {
        let alpha = match *self {
            Self::Constant(a) => a,
            Self::Decaying { alpha0, t0 } => {
                if !(t0 > 0.0) {
                    return Err(Error::InvalidParameter { name: "t0", value: t0 });
                }
                alpha0
            }
        };
        if alpha > 0.0 && alpha <= 1.0 || alpha == 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter { name: "alpha", value: alpha })
        }
    }
}

/// When a run stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Episodes(usize),
    /// Total environment steps; the episode in progress is cut off.
    Steps(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SarsaConfig {
    pub policy: PolicySpec,
    pub step_size: StepSize,
    pub budget: Budget,
    pub seed: u64,
    /// Entries snapshotted at the end of every episode.
    pub tracked: Vec<(usize, usize)>,
    pub max_episode_steps: usize,
}

impl SarsaConfig {
    pub fn new(policy: PolicySpec, alpha: f64, budget: Budget, seed: u64) -> Self {
        Self {
            policy,
            step_size: StepSize::Constant(alpha),
            budget,
            seed,
            tracked: Vec::new(),
            max_episode_steps: EPISODE_STEP_CAP,
        }
    }

    pub fn tracking(mut self, tracked: &[(usize, usize)]) -> Self {
        self.tracked = tracked.to_vec();
        self
    }

    pub fn with_step_size(mut self, step_size: StepSize) -> Self {
        self.step_size = step_size;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningTrace {
    /// Tracked entries at the end of each episode, one row per episode.
    pub per_episode_q: Vec<Vec<f64>>,
    /// Undiscounted return of each episode.
    pub per_episode_return: Vec<f64>,
    pub steps_total: u64,
    pub total_reward: f64,
    pub final_q: QTable,
}

impl LearningTrace {
    pub fn episodes(&self) -> usize {
        self.per_episode_return.len()
    }

    /// Average reward per environment step.
    pub fn reward_per_step(&self) -> f64 {
        if self.steps_total == 0 {
            0.0
        } else {
            self.total_reward / self.steps_total as f64
        }
    }
}

/// Runs SARSA: act, observe, pick the next action from the same policy, and
/// move `Q(s, a)` towards `r + gamma Q(s', a')` (just `r` when `s'` is
/// terminal).
pub fn run_sarsa<E: EpisodicEnv + ?Sized>(env: &E, q0: &QTable, config: &SarsaConfig) -> Result<LearningTrace> {
    config.step_size.validate()?;
    config.policy.validate()?;
    let (n_states, n_actions) = (env.n_states(), env.n_actions());
    if q0.n_states() != n_states || q0.n_actions() != n_actions {
        return Err(Error::Dimension(alloc::format!(
            "Q-table is {}x{}, environment is {n_states}x{n_actions}",
            q0.n_states(),
            q0.n_actions()
        )));
    }
    for &(s, a) in &config.tracked {
        if s >= n_states || a >= n_actions {
            return Err(Error::IndexOutOfRange { what: "tracked entry", index: s.max(a), bound: n_states });
        }
    }

    let gamma = env.gamma();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut q = q0.clone();
    let mut per_episode_q = Vec::new();
    let mut per_episode_return = Vec::new();
    let mut steps_total: u64 = 0;
    let mut total_reward = 0.0;

    let budget_left = |episodes: usize, steps: u64| match config.budget {
        Budget::Episodes(n) => episodes < n,
        Budget::Steps(n) => steps < n,
    };

    while budget_left(per_episode_return.len(), steps_total) {
        let mut s = env.reset();
        let mut a = config.policy.distribution(q.row(s))?.sample(&mut rng);
        let mut ret = 0.0;
        for _ in 0..config.max_episode_steps {
            let tr = env.step(s, a, &mut rng);
            if tr.next_state >= n_states {
                return Err(Error::IndexOutOfRange { what: "next state", index: tr.next_state, bound: n_states });
            }
            let alpha = config.step_size.at(steps_total);
            steps_total += 1;
            ret += tr.reward;
            total_reward += tr.reward;
            let current = q.get(s, a);
            if tr.terminal {
                q.set(s, a, current + alpha * (tr.reward - current));
                break;
            }
            let next_a = config.policy.distribution(q.row(tr.next_state))?.sample(&mut rng);
            let target = tr.reward + gamma * q.get(tr.next_state, next_a);
            let updated = current + alpha * (target - current);
            if !updated.is_finite() {
                return Err(Error::NonFiniteBackup { state: s, action: a });
            }
            q.set(s, a, updated);
            s = tr.next_state;
            a = next_a;
            if let Budget::Steps(n) = config.budget {
                if steps_total >= n {
                    break;
                }
            }
        }
        per_episode_q.push(config.tracked.iter().map(|&(s, a)| q.get(s, a)).collect());
        per_episode_return.push(ret);
    }

    Ok(LearningTrace { per_episode_q, per_episode_return, steps_total, total_reward, final_q: q })
}

/// Expected SARSA target `sum_{s'} P [R + gamma sum_{a'} pi(a'|s') Q(s', a')]`.
pub fn expected_sarsa_target(mdp: &Mdp, q: &QTable, policy: &PolicySpec, s: usize, a: usize) -> Result<f64> {
    mdp.check_pair(s, a)?;
    if !q.matches(mdp) {
        return Err(Error::Dimension("Q-table does not match the MDP".into()));
    }
    if mdp.is_terminal(s) {
        return Ok(0.0);
    }
    let values = (0..mdp.n_states())
        .map(|next| {
            if mdp.is_terminal(next) {
                Ok(0.0)
            } else {
                Ok(policy.distribution(q.row(next))?.expectation(q.row(next)))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(backup(mdp, &values, s, a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Population standard deviation of each tracked entry over the window.
    pub window_std: Vec<f64>,
    pub oscillating: bool,
}

/// Flags a trace as oscillating when any tracked entry's standard deviation
/// over the last `window` episodes exceeds `tau`.
pub fn detect_oscillation(trace: &LearningTrace, window: usize, tau: f64) -> Result<StabilityReport> {
    let len = trace.per_episode_q.len();
    if window == 0 || len < window {
        return Err(Error::TraceTooShort { len, window });
    }
    let tail = &trace.per_episode_q[len - window..];
    let width = tail[0].len();
    let window_std: Vec<f64> = (0..width)
        .map(|j| {
            let mean = tail.iter().map(|row| row[j]).sum::<f64>() / window as f64;
            let var = tail.iter().map(|row| (row[j] - mean) * (row[j] - mean)).sum::<f64>() / window as f64;
            libm::sqrt(var)
        })
        .collect();
    let oscillating = window_std.iter().any(|&sd| sd > tau);
    Ok(StabilityReport { window_std, oscillating })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// One state, one action, reward 1 every step, every step terminal.
    struct Bandit;

    impl EpisodicEnv for Bandit {
        fn n_states(&self) -> usize {
            2
        }
        fn n_actions(&self) -> usize {
            1
        }
        fn gamma(&self) -> f64 {
            0.0
        }
        fn reset(&self) -> usize {
            0
        }
        fn step(&self, _: usize, _: usize, _: &mut dyn RngCore) -> Transition {
            Transition { reward: 1.0, next_state: 1, terminal: true }
        }
    }

    fn trace_of(rows: Vec<Vec<f64>>) -> LearningTrace {
        LearningTrace {
            per_episode_return: vec![0.0; rows.len()],
            per_episode_q: rows,
            steps_total: 0,
            total_reward: 0.0,
            final_q: QTable::zeros_with_shape(1, 1),
        }
    }

    #[test]
    fn zero_step_size_leaves_q_unchanged() {
        let q0 = QTable::from_shape(2, 1, vec![0.3, 0.0]).unwrap();
        let cfg = SarsaConfig::new(PolicySpec::Boltzmann(1.0), 0.0, Budget::Episodes(50), 3).tracking(&[(0, 0)]);
        let trace = run_sarsa(&Bandit, &q0, &cfg).unwrap();
        assert!(trace.per_episode_q.iter().all(|row| row[0] == 0.3));
        assert_eq!(trace.final_q, q0);
    }

    #[test]
    fn exponential_averaging_recurrence() {
        let q0 = QTable::zeros_with_shape(2, 1);
        let cfg = SarsaConfig::new(PolicySpec::EpsilonGreedy(0.1), 0.5, Budget::Episodes(10), 0).tracking(&[(0, 0)]);
        let trace = run_sarsa(&Bandit, &q0, &cfg).unwrap();
        for (k, row) in trace.per_episode_q.iter().enumerate() {
            let expected = 1.0 - libm::pow(0.5, (k + 1) as f64);
            assert!((row[0] - expected).abs() < 1e-15);
        }
        assert_eq!(trace.steps_total, 10);
        assert_eq!(trace.reward_per_step(), 1.0);
    }

    #[test]
    fn step_budget_is_respected() {
        let q0 = QTable::zeros_with_shape(2, 1);
        let cfg = SarsaConfig::new(PolicySpec::Boltzmann(0.0), 0.1, Budget::Steps(7), 0);
        let trace = run_sarsa(&Bandit, &q0, &cfg).unwrap();
        assert_eq!(trace.steps_total, 7);
        assert_eq!(trace.episodes(), 7);
    }

    #[test]
    fn rejects_bad_alpha() {
        let q0 = QTable::zeros_with_shape(2, 1);
        let cfg = SarsaConfig::new(PolicySpec::Boltzmann(0.0), 1.5, Budget::Episodes(1), 0);
        assert!(matches!(run_sarsa(&Bandit, &q0, &cfg), Err(Error::InvalidParameter { name: "alpha", .. })));
        let cfg = SarsaConfig::new(PolicySpec::Boltzmann(0.0), -0.1, Budget::Episodes(1), 0);
        assert!(run_sarsa(&Bandit, &q0, &cfg).is_err());
    }

    #[test]
    fn oscillation_examples() {
        let flat = trace_of(vec![vec![0.7, -1.0]; 10]);
        let r = detect_oscillation(&flat, 10, 0.05).unwrap();
        assert!(r.window_std.iter().all(|&sd| sd < 1e-15));
        assert!(!r.oscillating);

        let alt = trace_of((0..10).map(|i| vec![(i % 2) as f64]).collect());
        let r = detect_oscillation(&alt, 10, 0.4).unwrap();
        assert_eq!(r.window_std, vec![0.5]);
        assert!(r.oscillating);
        assert!(!detect_oscillation(&alt, 10, 0.5).unwrap().oscillating);

        assert_eq!(detect_oscillation(&alt, 11, 0.1), Err(Error::TraceTooShort { len: 10, window: 11 }));
    }

    #[test]
    fn mdp_env_samples_kernel() {
        let t = vec![vec![vec![0.25, 0.75]], vec![vec![0.0, 1.0]]];
        let r = vec![vec![vec![1.0, 2.0]], vec![vec![0.0, 0.0]]];
        let mdp = Mdp::from_nested(&t, &r, 0.9, &[1]).unwrap();
        let env = MdpEnv::new(&mdp, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut to_terminal = 0;
        for _ in 0..10_000 {
            let tr = env.step(0, 0, &mut rng);
            assert_eq!(tr.reward, if tr.next_state == 0 { 1.0 } else { 2.0 });
            assert_eq!(tr.terminal, tr.next_state == 1);
            to_terminal += tr.terminal as usize;
        }
        assert!((to_terminal as f64 / 10_000.0 - 0.75).abs() < 0.02);
        assert!(MdpEnv::new(&mdp, 2).is_err());
    }

    #[test]
    fn expected_target_with_zero_discount_is_expected_reward() {
        let t = vec![vec![vec![0.2, 0.8], vec![1.0, 0.0]], vec![vec![0.5, 0.5], vec![0.0, 1.0]]];
        let r = vec![vec![vec![1.0, -1.0], vec![0.3, 0.0]], vec![vec![2.0, 4.0], vec![0.0, 7.0]]];
        let mdp = Mdp::from_nested(&t, &r, 0.0, &[]).unwrap();
        let q = QTable::from_values(&mdp, vec![5.0, -3.0, 1.0, 9.0]).unwrap();
        let v = expected_sarsa_target(&mdp, &q, &PolicySpec::Mellowmax(2.0), 0, 0).unwrap();
        assert_eq!(v, mdp.expected_reward(0, 0).unwrap());
    }
}
