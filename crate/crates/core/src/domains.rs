//! Benchmark problems: the two-state counterexample, random MDPs and the
//! multi-passenger taxi.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::sarsa::{EpisodicEnv, Transition};
use crate::{Error, Mdp, Result};

/// Entries of the two-state MDP whose values are non-trivial:
/// `Q(s1, a)` and `Q(s1, b)`.
pub const EXAMPLE_TRACKED: [(usize, usize); 2] = [(0, 0), (0, 1)];

/// Discount of the two-state MDP.
pub const EXAMPLE_GAMMA: f64 = 0.98;

/// Two-state, two-action MDP on which Boltzmann GVI has two fixed points for
/// `beta` around 16.55.
///
/// State 0 (`s1`) has actions `a` and `b`; state 1 (`s2`) is terminal. The
/// edge labels are `a`: stay with 0.34, exit with 0.66, rewards 0.122 and
/// 0.033; `b`: stay with 0.99, exit with 0.01, reward 0.033. The table below
/// is the MDP whose standard backup reproduces the backup that generated the
/// published fixed-point and vector-field plots, in which every edge reward
/// of a pair is collected in full and the continuation is discounted twice:
///
/// `Q(s1, a) <- 0.155 + 0.98 * (0.98 * 0.34) * op(Q(s1, .))`
/// `Q(s1, b) <- 0.033 + 0.98 * (0.98 * 0.99) * op(Q(s1, .))`
pub fn example_mdp() -> Mdp {
    let g = EXAMPLE_GAMMA;
    let stay_a = g * 0.34;
    let stay_b = g * 0.99;
    let r_a = 0.122 + 0.033;
    let r_b = 0.033;
    let transition =
        vec![vec![vec![stay_a, 1.0 - stay_a], vec![stay_b, 1.0 - stay_b]], vec![vec![0.0, 1.0], vec![0.0, 1.0]]];
    let reward = vec![vec![vec![r_a, r_a], vec![r_b, r_b]], vec![vec![0.0, 0.0], vec![0.0, 0.0]]];
    Mdp::from_nested(&transition, &reward, g, &[1]).expect("example MDP is valid")
}

/// Seed of the `index`-th instance in a study with master seed `master`.
/// Each instance gets its own stream, so results do not depend on how the
/// instances are scheduled.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // SplitMix64 finalizer over a combination of both words.
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Additive noise stage: with probability `probability`, add a Gaussian draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseStage {
    pub probability: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Sampling recipe for random MDPs.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomMdpConfig {
    /// Inclusive range of state counts.
    pub states: (usize, usize),
    /// Inclusive range of action counts.
    pub actions: (usize, usize),
    /// Base entries are uniform on `[0, base_uniform_high]`.
    pub base_uniform_high: f64,
    pub noise1: NoiseStage,
    pub noise2: NoiseStage,
    /// Rewards are rescaled so that the largest equals this.
    pub reward_max: f64,
    pub gamma: f64,
}

impl Default for RandomMdpConfig {
    fn default() -> Self {
        Self {
            states: (2, 10),
            actions: (2, 5),
            base_uniform_high: 0.01,
            noise1: NoiseStage { probability: 0.5, mean: 1.0, variance: 0.1 },
            noise2: NoiseStage { probability: 0.1, mean: 100.0, variance: 1.0 },
            reward_max: 0.5,
            gamma: crate::config::RANDOM_STUDY_GAMMA,
        }
    }
}

impl RandomMdpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, value| Err(Error::InvalidParameter { name, value });
        if self.states.0 == 0 || self.states.0 > self.states.1 {
            return bad("state range", self.states.0 as f64);
        }
        if self.actions.0 == 0 || self.actions.0 > self.actions.1 {
            return bad("action range", self.actions.0 as f64);
        }
        for stage in [self.noise1, self.noise2] {
            if !(0.0..=1.0).contains(&stage.probability) {
                return bad("noise probability", stage.probability);
            }
            if !(stage.variance >= 0.0) {
                return bad("noise variance", stage.variance);
            }
        }
        if !(self.base_uniform_high > 0.0) {
            return bad("base_uniform_high", self.base_uniform_high);
        }
        if !(self.reward_max > 0.0) {
            return bad("reward_max", self.reward_max);
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Discount(self.gamma));
        }
        Ok(())
    }
}

/// Counters collected while sampling a random MDP.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RandomMdpDiagnostics {
    /// Raw entries drawn (transition and reward tables together).
    pub entries: usize,
    pub noise1_hits: usize,
    pub noise2_hits: usize,
    /// Raw entries that came out negative and were clamped to zero.
    pub clamped: usize,
    /// Transition rows redrawn because they had no mass.
    pub resampled_rows: usize,
}

struct RawSampler<'a> {
    config: &'a RandomMdpConfig,
    normal1: Normal<f64>,
    normal2: Normal<f64>,
}

impl RawSampler<'_> {
    fn draw(&self, rng: &mut ChaCha8Rng, diag: &mut RandomMdpDiagnostics) -> f64 {
        let mut x = rng.random_range(0.0..=self.config.base_uniform_high);
        if rng.random_bool(self.config.noise1.probability) {
            x += self.normal1.sample(rng);
            diag.noise1_hits += 1;
        }
        if rng.random_bool(self.config.noise2.probability) {
            x += self.normal2.sample(rng);
            diag.noise2_hits += 1;
        }
        diag.entries += 1;
        if x < 0.0 {
            diag.clamped += 1;
            0.0
        } else {
            x
        }
    }
}

/// Samples a random MDP: sizes uniform over the configured ranges, raw
/// transition entries from the base-plus-noise recipe clamped at zero and
/// normalized per row, rewards from the same recipe scaled so the largest
/// equals `reward_max`. No state is terminal.
pub fn random_mdp(config: &RandomMdpConfig, seed: u64) -> Result<(Mdp, RandomMdpDiagnostics)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = RawSampler {
        config,
        normal1: Normal::new(config.noise1.mean, libm::sqrt(config.noise1.variance))
            .map_err(|_| Error::InvalidParameter { name: "noise variance", value: config.noise1.variance })?,
        normal2: Normal::new(config.noise2.mean, libm::sqrt(config.noise2.variance))
            .map_err(|_| Error::InvalidParameter { name: "noise variance", value: config.noise2.variance })?,
    };
    let mut diag = RandomMdpDiagnostics::default();

    let n_states = rng.random_range(config.states.0..=config.states.1);
    let n_actions = rng.random_range(config.actions.0..=config.actions.1);

    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        let row = loop {
            let row: Vec<f64> = (0..n_states).map(|_| sampler.draw(&mut rng, &mut diag)).collect();
            let mass: f64 = row.iter().sum();
            if mass > 0.0 {
                break row.into_iter().map(|x| x / mass).collect::<Vec<_>>();
            }
            diag.resampled_rows += 1;
        };
        transition.extend(row);
    }

    let mut reward: Vec<f64> =
        (0..n_states * n_actions * n_states).map(|_| sampler.draw(&mut rng, &mut diag)).collect();
    let top = reward.iter().copied().fold(0.0, f64::max);
    if top > 0.0 {
        reward.iter_mut().for_each(|r| *r = *r / top * config.reward_max);
    }

    let mdp = Mdp::new(n_states, n_actions, transition, reward, config.gamma, &[])?;
    Ok((mdp, diag))
}

/// Grid moves of the taxi.
pub const TAXI_ACTIONS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, 1), (0, -1)];

/// Default taxi grid: `#` wall, `.` floor, `F` passenger, `S` start, `D`
/// destination.
pub const TAXI_LAYOUT: &str = "\
S..#..F
.#...#.
.#.....
...#.#.
F#...#.
..#F..D
";

#[derive(Debug, Clone, PartialEq)]
pub struct TaxiConfig {
    pub layout: String,
    pub gamma: f64,
    /// Reward for arriving at the destination with 0, 1, 2, ... passengers.
    pub delivery_rewards: Vec<f64>,
}

impl Default for TaxiConfig {
    fn default() -> Self {
        Self { layout: TAXI_LAYOUT.into(), gamma: 0.99, delivery_rewards: vec![0.0, 1.0, 3.0, 15.0] }
    }
}

/// Multi-passenger taxi. Movement is deterministic and blocked by walls and
/// the grid edge; entering a passenger cell picks that passenger up;
/// entering the destination ends the episode and pays by the number of
/// passengers aboard. All other transitions pay zero.
///
/// States are `cell * 2^passengers + pickup_mask` over the non-wall cells
/// in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxiEnv {
    width: usize,
    height: usize,
    /// Open-cell index of each grid position, `None` for walls.
    cell_at: Vec<Option<usize>>,
    cell_pos: Vec<(usize, usize)>,
    /// Passenger index of each open cell.
    passenger_at: Vec<Option<usize>>,
    n_passengers: usize,
    start: usize,
    destination: usize,
    gamma: f64,
    delivery_rewards: Vec<f64>,
}

impl TaxiEnv {
    pub fn new(config: &TaxiConfig) -> Result<Self> {
        let rows: Vec<&str> = config.layout.lines().filter(|l| !l.trim().is_empty()).collect();
        if rows.is_empty() {
            return Err(Error::Layout("empty grid".into()));
        }
        let width = rows.iter().map(|r| r.chars().count()).max().unwrap_or(0);
        let height = rows.len();
        let mut cell_at = vec![None; width * height];
        let mut cell_pos = Vec::new();
        let mut passenger_at = Vec::new();
        let mut n_passengers = 0;
        let mut start = None;
        let mut destination = None;
        for (r, line) in rows.iter().enumerate() {
            let chars: Vec<char> = line.chars().collect();
            for c in 0..width {
                let ch = chars.get(c).copied().unwrap_or('#');
                if ch == '#' {
                    continue;
                }
                let id = cell_pos.len();
                match ch {
                    '.' => passenger_at.push(None),
                    'F' => {
                        passenger_at.push(Some(n_passengers));
                        n_passengers += 1;
                    }
                    'S' | 'D' => {
                        let slot = if ch == 'S' { &mut start } else { &mut destination };
                        if slot.replace(id).is_some() {
                            return Err(Error::Layout(format!("more than one '{ch}' cell")));
                        }
                        passenger_at.push(None);
                    }
                    other => return Err(Error::Layout(format!("unknown cell '{other}' at row {r}, column {c}"))),
                }
                cell_at[r * width + c] = Some(id);
                cell_pos.push((r, c));
            }
        }
        let start = start.ok_or_else(|| Error::Layout("no start cell 'S'".into()))?;
        let destination = destination.ok_or_else(|| Error::Layout("no destination cell 'D'".into()))?;
        if n_passengers > 16 {
            return Err(Error::Layout(format!("{n_passengers} passengers is too many")));
        }
        if config.delivery_rewards.len() != n_passengers + 1 {
            return Err(Error::Layout(format!(
                "{} delivery rewards for {n_passengers} passengers",
                config.delivery_rewards.len()
            )));
        }
        if !(0.0..1.0).contains(&config.gamma) {
            return Err(Error::Discount(config.gamma));
        }
        Ok(Self {
            width,
            height,
            cell_at,
            cell_pos,
            passenger_at,
            n_passengers,
            start,
            destination,
            gamma: config.gamma,
            delivery_rewards: config.delivery_rewards.clone(),
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cell_pos.len()
    }

    pub fn n_passengers(&self) -> usize {
        self.n_passengers
    }

    fn masks(&self) -> usize {
        1 << self.n_passengers
    }

    pub fn encode(&self, cell: usize, mask: usize) -> usize {
        cell * self.masks() + mask
    }

    pub fn decode(&self, state: usize) -> (usize, usize) {
        (state / self.masks(), state % self.masks())
    }

    pub fn cell_position(&self, cell: usize) -> (usize, usize) {
        self.cell_pos[cell]
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.decode(state).0 == self.destination
    }

    /// Deterministic successor of `(state, action)`.
    pub fn transition(&self, state: usize, action: usize) -> Transition {
        let (cell, mut mask) = self.decode(state);
        if cell == self.destination {
            return Transition { reward: 0.0, next_state: state, terminal: true };
        }
        let (r, c) = self.cell_pos[cell];
        let (dr, dc) = TAXI_ACTIONS[action];
        let (nr, nc) = (r as isize + dr, c as isize + dc);
        let target = if nr >= 0 && nc >= 0 && (nr as usize) < self.height && (nc as usize) < self.width {
            self.cell_at[nr as usize * self.width + nc as usize]
        } else {
            None
        };
        let next_cell = target.unwrap_or(cell);
        if let Some(p) = self.passenger_at[next_cell] {
            mask |= 1 << p;
        }
        let terminal = next_cell == self.destination;
        let reward = if terminal { self.delivery_rewards[mask.count_ones() as usize] } else { 0.0 };
        Transition { reward, next_state: self.encode(next_cell, mask), terminal }
    }

    /// The taxi as an explicit MDP with terminal destination states.
    pub fn to_mdp(&self) -> Mdp {
        let n = self.n_states();
        let mut transition = vec![0.0; n * 4 * n];
        let mut reward = vec![0.0; n * 4 * n];
        let mut terminals = Vec::new();
        for s in 0..n {
            if self.is_terminal(s) {
                terminals.push(s);
            }
            for a in 0..4 {
                let tr = self.transition(s, a);
                let idx = (s * 4 + a) * n + tr.next_state;
                transition[idx] = 1.0;
                reward[idx] = tr.reward;
            }
        }
        Mdp::new(n, 4, transition, reward, self.gamma, &terminals).expect("taxi MDP is valid")
    }
}

impl EpisodicEnv for TaxiEnv {
    fn n_states(&self) -> usize {
        self.n_cells() * self.masks()
    }

    fn n_actions(&self) -> usize {
        TAXI_ACTIONS.len()
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn reset(&self) -> usize {
        self.encode(self.start, 0)
    }

    fn step(&self, state: usize, action: usize, _rng: &mut dyn RngCore) -> Transition {
        self.transition(state, action)
    }
}
