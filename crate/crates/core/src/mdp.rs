//! Finite MDPs with per-edge rewards, and state-action value tables.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::config::{ROW_SUM_INGEST_TOL, ROW_SUM_SNAP};
use crate::{Error, Result};

/// A finite MDP with a uniform action count.
///
/// Rewards are stored per edge, `R(s, a, s')`; the per-pair reward `R(s, a)`
/// is [`Mdp::expected_reward`]. Terminal states carry a zero-reward self-loop
/// for every action and zero value.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    terminals: Vec<usize>,
    terminal_mask: Vec<bool>,
    transition: Vec<f64>,
    reward: Vec<f64>,
}

impl Mdp {
    /// Validates and normalizes a dense MDP. `transition` and `reward` are
    /// flat `[state][action][next_state]` tables.
    ///
    /// Rows of non-terminal pairs must sum to one within
    /// [`ROW_SUM_INGEST_TOL`] and are then renormalized. Rows of terminal
    /// states are replaced by a zero-reward self-loop.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        mut transition: Vec<f64>,
        mut reward: Vec<f64>,
        gamma: f64,
        terminals: &[usize],
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Dimension(format!(
                "need at least one state and one action, got {n_states} x {n_actions}"
            )));
        }
        let len = n_states * n_actions * n_states;
        if transition.len() != len {
            return Err(Error::Dimension(format!("transition has {} entries, expected {len}", transition.len())));
        }
        if reward.len() != len {
            return Err(Error::Dimension(format!("reward has {} entries, expected {len}", reward.len())));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Discount(gamma));
        }

        let mut terminal_mask = vec![false; n_states];
        for &t in terminals {
            if t >= n_states {
                return Err(Error::IndexOutOfRange { what: "terminal state", index: t, bound: n_states });
            }
            terminal_mask[t] = true;
        }

        for s in 0..n_states {
            for a in 0..n_actions {
                let base = (s * n_actions + a) * n_states;
                let row = &mut transition[base..base + n_states];
                let rewards = &mut reward[base..base + n_states];
                if terminal_mask[s] {
                    row.fill(0.0);
                    row[s] = 1.0;
                    rewards.fill(0.0);
                    continue;
                }
                for (next, &p) in row.iter().enumerate() {
                    if !p.is_finite() {
                        return Err(Error::NonFinite("transition"));
                    }
                    if p < 0.0 {
                        return Err(Error::NegativeProbability { state: s, action: a, next_state: next, value: p });
                    }
                }
                if rewards.iter().any(|r| !r.is_finite()) {
                    return Err(Error::NonFinite("reward"));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_INGEST_TOL {
                    return Err(Error::RowSum { state: s, action: a, sum });
                }
                if (sum - 1.0).abs() > ROW_SUM_SNAP {
                    row.iter_mut().for_each(|p| *p /= sum);
                }
            }
        }

        let terminals = (0..n_states).filter(|&s| terminal_mask[s]).collect();
        Ok(Self { n_states, n_actions, gamma, terminals, terminal_mask, transition, reward })
    }

    /// Builds an MDP from nested `[state][action][next_state]` tables.
    pub fn from_nested(
        transition: &[Vec<Vec<f64>>],
        reward: &[Vec<Vec<f64>>],
        gamma: f64,
        terminals: &[usize],
    ) -> Result<Self> {
        let n_states = transition.len();
        let n_actions = transition.first().map_or(0, Vec::len);
        let flatten = |name: &str, table: &[Vec<Vec<f64>>]| -> Result<Vec<f64>> {
            if table.len() != n_states {
                return Err(Error::Dimension(format!("{name} has {} states, expected {n_states}", table.len())));
            }
            let mut flat = Vec::with_capacity(n_states * n_actions * n_states);
            for (s, per_action) in table.iter().enumerate() {
                if per_action.len() != n_actions {
                    return Err(Error::Dimension(format!(
                        "{name}[{s}] has {} actions, expected {n_actions}",
                        per_action.len()
                    )));
                }
                for (a, row) in per_action.iter().enumerate() {
                    if row.len() != n_states {
                        return Err(Error::Dimension(format!(
                            "{name}[{s}][{a}] has {} entries, expected {n_states}",
                            row.len()
                        )));
                    }
                    flat.extend_from_slice(row);
                }
            }
            Ok(flat)
        };
        let t = flatten("transition", transition)?;
        let r = flatten("reward", reward)?;
        Self::new(n_states, n_actions, t, r, gamma, terminals)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Terminal states in increasing order.
    pub fn terminals(&self) -> &[usize] {
        &self.terminals
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal_mask[s]
    }

    fn row_base(&self, s: usize, a: usize) -> usize {
        (s * self.n_actions + a) * self.n_states
    }

    /// Transition probabilities out of `(s, a)`. Panics on out-of-range
    /// indices.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let base = self.row_base(s, a);
        &self.transition[base..base + self.n_states]
    }

    /// Per-edge rewards out of `(s, a)`. Panics on out-of-range indices.
    pub fn reward_row(&self, s: usize, a: usize) -> &[f64] {
        let base = self.row_base(s, a);
        &self.reward[base..base + self.n_states]
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn check_pair(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::IndexOutOfRange { what: "state", index: s, bound: self.n_states });
        }
        if a >= self.n_actions {
            return Err(Error::IndexOutOfRange { what: "action", index: a, bound: self.n_actions });
        }
        Ok(())
    }

    /// `sum_{s'} P(s, a, s') R(s, a, s')`.
    pub fn expected_reward(&self, s: usize, a: usize) -> Result<f64> {
        self.check_pair(s, a)?;
        Ok(self.transition_row(s, a).iter().zip(self.reward_row(s, a)).map(|(p, r)| p * r).sum())
    }

    /// Smallest and largest per-edge reward over non-terminal pairs.
    pub fn reward_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in (0..self.n_states).filter(|&s| !self.terminal_mask[s]) {
            for a in 0..self.n_actions {
                for (&p, &r) in self.transition_row(s, a).iter().zip(self.reward_row(s, a)) {
                    if p > 0.0 {
                        lo = lo.min(r);
                        hi = hi.max(r);
                    }
                }
            }
        }
        if lo > hi {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    /// State-action pairs outside terminal states.
    pub fn non_trivial_entries(&self) -> Vec<(usize, usize)> {
        (0..self.n_states)
            .filter(|&s| !self.terminal_mask[s])
            .flat_map(|s| (0..self.n_actions).map(move |a| (s, a)))
            .collect()
    }
}

/// State-action value estimates. Entries of terminal states are zero.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(mdp: &Mdp) -> Self {
        Self::zeros_with_shape(mdp.n_states, mdp.n_actions)
    }

    pub fn zeros_with_shape(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, values: vec![0.0; n_states * n_actions] }
    }

    /// Table for `mdp` from row-major values; terminal entries are forced to
    /// zero.
    pub fn from_values(mdp: &Mdp, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != mdp.n_states * mdp.n_actions {
            return Err(Error::Dimension(format!(
                "Q-table has {} entries, expected {}",
                values.len(),
                mdp.n_states * mdp.n_actions
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Q-table"));
        }
        for &t in mdp.terminals() {
            values[t * mdp.n_actions..(t + 1) * mdp.n_actions].fill(0.0);
        }
        Ok(Self { n_states: mdp.n_states, n_actions: mdp.n_actions, values })
    }

    /// Table with a given shape and no terminal information.
    pub fn from_shape(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "Q-table has {} entries, expected {}",
                values.len(),
                n_states * n_actions
            )));
        }
        Ok(Self { n_states, n_actions, values })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn matches(&self, mdp: &Mdp) -> bool {
        self.n_states == mdp.n_states && self.n_actions == mdp.n_actions
    }

    /// Infinity-norm distance between two tables of the same shape.
    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(row: [f64; 2], gamma: f64) -> Result<Mdp> {
        let t = vec![vec![row.to_vec(), vec![0.5, 0.5]], vec![vec![0.0, 1.0], vec![1.0, 0.0]]];
        let r = vec![vec![vec![0.0, 1.0], vec![1.0, -1.0]], vec![vec![0.0, 0.0], vec![0.5, 0.5]]];
        Mdp::from_nested(&t, &r, gamma, &[])
    }

    #[test]
    fn accepts_valid_two_state_mdp() {
        let m = two_state([0.3, 0.7], 0.98).unwrap();
        assert_eq!(m.n_states(), 2);
        assert_eq!(m.gamma(), 0.98);
    }

    #[test]
    fn rejects_bad_row_sum_and_discount() {
        assert!(matches!(two_state([0.4, 0.5], 0.9), Err(Error::RowSum { state: 0, action: 0, .. })));
        assert_eq!(two_state([0.5, 0.5], 1.0), Err(Error::Discount(1.0)));
        assert_eq!(two_state([0.5, 0.5], -0.1), Err(Error::Discount(-0.1)));
        assert!(matches!(two_state([-0.1, 1.1], 0.9), Err(Error::NegativeProbability { .. })));
    }

    #[test]
    fn rejects_dimension_mismatch() {
        assert!(matches!(Mdp::new(2, 2, vec![0.5; 7], vec![0.0; 8], 0.5, &[]), Err(Error::Dimension(_))));
        assert!(matches!(Mdp::new(2, 2, vec![0.5; 8], vec![0.0; 9], 0.5, &[]), Err(Error::Dimension(_))));
        assert!(matches!(Mdp::new(2, 2, vec![0.5; 8], vec![0.0; 8], 0.5, &[2]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn normalizes_small_drift() {
        let m = two_state([0.3, 0.7 + 5e-7], 0.5).unwrap();
        let sum: f64 = m.transition_row(0, 0).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn terminal_rows_become_zero_reward_self_loops() {
        let t = vec![vec![vec![0.2, 0.8]], vec![vec![0.9, 0.1]]];
        let r = vec![vec![vec![1.0, 2.0]], vec![vec![5.0, 5.0]]];
        let m = Mdp::from_nested(&t, &r, 0.9, &[1]).unwrap();
        assert_eq!(m.transition_row(1, 0), &[0.0, 1.0]);
        assert_eq!(m.reward_row(1, 0), &[0.0, 0.0]);
        assert!(m.is_terminal(1) && !m.is_terminal(0));
        let q = QTable::from_values(&m, vec![3.0, 4.0]).unwrap();
        assert_eq!(q.values(), &[3.0, 0.0]);
    }

    #[test]
    fn expected_reward_examples() {
        let m = two_state([0.5, 0.5], 0.9).unwrap();
        assert_eq!(m.expected_reward(0, 0).unwrap(), 0.5);
        assert_eq!(m.expected_reward(1, 0).unwrap(), 0.0);
        let t = vec![vec![vec![0.2, 0.8], vec![0.0, 1.0]], vec![vec![1.0, 0.0], vec![1.0, 0.0]]];
        let r = vec![vec![vec![1.0, -1.0], vec![0.0, 0.5]], vec![vec![0.0; 2], vec![0.0; 2]]];
        let m = Mdp::from_nested(&t, &r, 0.9, &[]).unwrap();
        assert!((m.expected_reward(0, 0).unwrap() - (-0.6)).abs() < 1e-15);
        assert_eq!(m.expected_reward(0, 1).unwrap(), 0.5);
        assert!(matches!(m.expected_reward(2, 0), Err(Error::IndexOutOfRange { what: "state", .. })));
        assert!(matches!(m.expected_reward(0, 2), Err(Error::IndexOutOfRange { what: "action", .. })));
    }

    #[test]
    fn qtable_diff() {
        let a = QTable::from_shape(1, 2, vec![1.0, 2.0]).unwrap();
        let b = QTable::from_shape(1, 2, vec![1.5, 1.0]).unwrap();
        assert_eq!(a.max_abs_diff(&b), 1.0);
        assert!(QTable::from_shape(1, 2, vec![1.0]).is_err());
    }
}
