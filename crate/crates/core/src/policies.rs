//! Action-selection distributions over one row of action values.
//!
//! The maximum-entropy mellowmax policy is the Boltzmann distribution whose
//! expected action value equals `mellowmax(q, omega)`. Its inverse
//! temperature is state dependent and found by root finding in
//! [`solve_beta`]. [`solve_policy_by_convex_program`] solves the same
//! entropy maximization directly in the probability simplex and exists to
//! cross-check the root-finding route.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::config::{BETA_BRACKET_TOL, BETA_MAX_DOUBLINGS, BETA_ROOT_TOL};
use crate::ops::{self, argmax};
use crate::roots::{brent, Tolerance};
use crate::{Error, Result};

/// A probability vector over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

impl ActionDistribution {
    /// Wraps an already normalized probability vector.
    pub fn new(probs: Vec<f64>) -> Self {
        debug_assert!(!probs.is_empty());
        Self { probs }
    }

    pub fn uniform(n: usize) -> Self {
        Self { probs: vec![1.0 / n as f64; n] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// `sum_a pi(a) q(a)`.
    pub fn expectation(&self, q: &[f64]) -> f64 {
        self.probs.iter().zip(q).map(|(p, x)| p * x).sum()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * libm::log(p)).sum()
    }

    pub fn total_variation(&self, other: &ActionDistribution) -> f64 {
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// Draws an action index by inverting the cumulative distribution.
    pub fn sample(&self, rng: &mut dyn RngCore) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }
}

/// Which action-selection rule to use, with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", content = "parameter", rename_all = "snake_case"))]
pub enum PolicySpec {
    EpsilonGreedy(f64),
    Boltzmann(f64),
    Mellowmax(f64),
}

impl PolicySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::EpsilonGreedy(e) if !(0.0..=1.0).contains(&e) => {
                Err(Error::InvalidParameter { name: "epsilon", value: e })
            }
            Self::Boltzmann(b) if !b.is_finite() => Err(Error::InvalidParameter { name: "beta", value: b }),
            Self::Mellowmax(w) if !w.is_finite() => Err(Error::InvalidParameter { name: "omega", value: w }),
            _ => Ok(()),
        }
    }

    /// Builds a policy from its name (`epsilon_greedy`/`eps`,
    /// `boltzmann`/`boltz`, `mellowmax`/`mm`) and parameter.
    pub fn from_name(name: &str, parameter: f64) -> Result<Self> {
        let spec = match name {
            "epsilon_greedy" | "eps" | "epsilon-greedy" => Self::EpsilonGreedy(parameter),
            "boltzmann" | "boltz" => Self::Boltzmann(parameter),
            "mellowmax" | "mm" => Self::Mellowmax(parameter),
            _ => return Err(Error::InvalidParameter { name: "policy", value: f64::NAN }),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::EpsilonGreedy(_) => "epsilon_greedy",
            Self::Boltzmann(_) => "boltzmann",
            Self::Mellowmax(_) => "mellowmax",
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            Self::EpsilonGreedy(p) | Self::Boltzmann(p) | Self::Mellowmax(p) => p,
        }
    }

    pub fn distribution(&self, q: &[f64]) -> Result<ActionDistribution> {
        match *self {
            Self::EpsilonGreedy(e) => epsilon_greedy(q, e),
            Self::Boltzmann(b) => Ok(boltzmann_policy(q, b)),
            Self::Mellowmax(w) => mellowmax_policy(q, w),
        }
    }
}

/// `1 - eps + eps/n` on the greedy action (lowest index on ties), `eps/n`
/// elsewhere.
pub fn epsilon_greedy(q: &[f64], eps: f64) -> Result<ActionDistribution> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter { name: "epsilon", value: eps });
    }
    let n = q.len();
    let mut probs = vec![eps / n as f64; n];
    probs[argmax(q)] += 1.0 - eps;
    Ok(ActionDistribution { probs })
}

pub fn boltzmann_policy(q: &[f64], beta: f64) -> ActionDistribution {
    ActionDistribution { probs: ops::boltz_weights(q, beta) }
}

/// Normalized root function of the maximum-entropy policy:
/// `sum_a pi_beta(a) (q(a) - target)` with `pi_beta` the Boltzmann weights.
///
/// It has the sign of `sum_a e^{beta (q(a) - target)} (q(a) - target)` and
/// its derivative in `beta` is the variance of `q` under `pi_beta`, so it is
/// nondecreasing.
pub fn beta_residual(q: &[f64], target: f64, beta: f64) -> f64 {
    let shift = q.iter().map(|&x| beta * (x - target)).fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for &x in q {
        let d = x - target;
        let w = libm::exp(beta * d - shift);
        num += w * d;
        den += w;
    }
    num / den
}

/// Inverse temperature `beta` at which the Boltzmann policy over `q` has
/// expected value `mellowmax(q, omega)`.
///
/// The bracket starts at `[-1, 1]` and doubles until the residual changes
/// sign; Brent's method then refines it. Constant rows have no unique root
/// and yield [`Error::DegenerateRow`].
pub fn solve_beta(q: &[f64], omega: f64) -> Result<f64> {
    if !omega.is_finite() {
        return Err(Error::InvalidParameter { name: "omega", value: omega });
    }
    if ops::max(q) == ops::min(q) {
        return Err(Error::DegenerateRow);
    }
    let target = ops::mellowmax(q, omega);
    let f = |beta: f64| beta_residual(q, target, beta);

    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    let mut doublings = 0;
    loop {
        let (flo, fhi) = (f(lo), f(hi));
        if flo <= 0.0 && fhi >= 0.0 {
            break;
        }
        if doublings == BETA_MAX_DOUBLINGS {
            return Err(Error::Bracket(doublings));
        }
        doublings += 1;
        if flo > 0.0 {
            hi = lo;
            lo *= 2.0;
        } else {
            lo = hi;
            hi *= 2.0;
        }
    }
    let tol = Tolerance { residual: BETA_ROOT_TOL, width: BETA_BRACKET_TOL, max_iter: 500 };
    brent(f, lo, hi, tol)
}

/// Maximum-entropy distribution whose expectation equals
/// `mellowmax(q, omega)`. Constant rows give the uniform distribution.
pub fn mellowmax_policy(q: &[f64], omega: f64) -> Result<ActionDistribution> {
    match solve_beta(q, omega) {
        Ok(beta) => Ok(boltzmann_policy(q, beta)),
        Err(Error::DegenerateRow) => Ok(ActionDistribution::uniform(q.len())),
        Err(e) => Err(e),
    }
}

/// Solves `max H(pi) s.t. sum pi = 1, sum pi q = mellowmax(q, omega),
/// pi >= 0` with a feasible-start equality-constrained Newton method on the
/// simplex. Independent of the Boltzmann form and of [`solve_beta`].
pub fn solve_policy_by_convex_program(q: &[f64], omega: f64, max_iter: usize) -> Result<ActionDistribution> {
    let n = q.len();
    let (lo, hi) = (ops::min(q), ops::max(q));
    if lo == hi {
        return Ok(ActionDistribution::uniform(n));
    }
    let target = ops::mellowmax(q, omega);
    // Centre the values so the 2x2 normal equations stay well conditioned.
    let mu = ops::mean(q);
    let x: Vec<f64> = q.iter().map(|v| v - mu).collect();
    let m = target - mu;

    // Feasible interior start: uniform mixed with the extreme action on the
    // target's side of the mean.
    let mut pi = vec![1.0 / n as f64; n];
    if m != 0.0 {
        let k = if m > 0.0 { argmax(q) } else { ops::argmin(q) };
        let t = m / x[k];
        for (i, p) in pi.iter_mut().enumerate() {
            *p *= 1.0 - t;
            if i == k {
                *p += t;
            }
        }
    }
    if pi.iter().any(|&p| p <= 0.0) {
        return Err(Error::NonConvergence(0));
    }

    let objective = |p: &[f64]| p.iter().map(|&v| v * libm::log(v)).sum::<f64>();
    let mut step = vec![0.0; n];
    for _ in 0..max_iter {
        let grad: Vec<f64> = pi.iter().map(|&p| libm::log(p) + 1.0).collect();
        // Minimize 1/2 d'Hd + g'd subject to 1'd = 0, x'd = 0 with
        // H = diag(1/pi): d = -diag(pi)(g + A'nu), (A diag(pi) A') nu = -A diag(pi) g.
        let (mut s0, mut s1, mut s2, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            s0 += pi[i];
            s1 += pi[i] * x[i];
            s2 += pi[i] * x[i] * x[i];
            r0 -= pi[i] * grad[i];
            r1 -= pi[i] * x[i] * grad[i];
        }
        let det = s0 * s2 - s1 * s1;
        let nu0 = (r0 * s2 - r1 * s1) / det;
        let nu1 = (s0 * r1 - s1 * r0) / det;
        let mut decrement = 0.0;
        for i in 0..n {
            step[i] = -pi[i] * (grad[i] + nu0 + nu1 * x[i]);
            decrement += step[i] * step[i] / pi[i];
        }
        if decrement < 1e-24 {
            return Ok(ActionDistribution { probs: pi });
        }
        // Backtracking line search that keeps pi strictly positive.
        let f0 = objective(&pi);
        let slope = -decrement;
        let mut t = 1.0;
        let mut candidate = pi.clone();
        loop {
            for i in 0..n {
                candidate[i] = pi[i] + t * step[i];
            }
            if candidate.iter().all(|&p| p > 0.0) && objective(&candidate) <= f0 + 0.25 * t * slope {
                break;
            }
            t *= 0.5;
            if t < 1e-30 {
                return Ok(ActionDistribution { probs: pi });
            }
        }
        // Once the objective no longer resolves the step, the iterate only creeps.
        let moved = pi.iter().zip(&candidate).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved <= 1e-16 {
            return Ok(ActionDistribution { probs: pi });
        }
        core::mem::swap(&mut pi, &mut candidate);
    }
    Err(Error::NonConvergence(max_iter))
}
