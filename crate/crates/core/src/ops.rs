//! Backup operators over a vector of action values.
//!
//! All operators take a non-empty slice of finite values. Exponentials are
//! always evaluated after shifting by the extreme entry on the side the
//! exponent grows towards, so inputs with `|parameter * x|` in the thousands
//! are safe.

use alloc::vec::Vec;

use crate::{Error, Result};

/// A validated, non-empty vector of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector(Vec<f64>);

impl ValueVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("value vector"));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ValueVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn min(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest entry, lowest index on ties.
pub fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// `eps * mean + (1 - eps) * max`.
pub fn eps(xs: &[f64], eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(eps * mean(xs) + (1.0 - eps) * max(xs))
}

/// Shift constant that keeps every `param * (x - c)` non-positive.
fn shift(xs: &[f64], param: f64) -> f64 {
    if param >= 0.0 {
        max(xs)
    } else {
        min(xs)
    }
}

/// Softmax weights `e^{beta x_i} / sum_j e^{beta x_j}`.
pub fn boltz_weights(xs: &[f64], beta: f64) -> Vec<f64> {
    let c = shift(xs, beta);
    let mut w: Vec<f64> = xs.iter().map(|&x| libm::exp(beta * (x - c))).collect();
    let total: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= total;
    }
    w
}

/// Boltzmann-weighted average of the entries.
pub fn boltz(xs: &[f64], beta: f64) -> f64 {
    let c = shift(xs, beta);
    let mut num = 0.0;
    let mut den = 0.0;
    for &x in xs {
        let w = libm::exp(beta * (x - c));
        num += w * (x - c);
        den += w;
    }
    c + num / den
}

/// Mellowmax, `log(mean(e^{omega x})) / omega`, with the `omega = 0` limit
/// defined as the mean.
///
/// Evaluated as `c + log1p(mean(expm1(omega (x - c)))) / omega`, which is
/// overflow-free and keeps precision when `omega` is tiny.
pub fn mellowmax(xs: &[f64], omega: f64) -> f64 {
    if omega == 0.0 {
        return mean(xs);
    }
    let c = shift(xs, omega);
    mellowmax_shifted(xs, omega, c)
}

/// Mellowmax evaluated with an explicit shift constant. Any finite `c`
/// gives the same value up to rounding as long as nothing overflows.
pub fn mellowmax_shifted(xs: &[f64], omega: f64, c: f64) -> f64 {
    if omega == 0.0 {
        return mean(xs);
    }
    let m1 = xs.iter().map(|&x| libm::expm1(omega * (x - c))).sum::<f64>() / xs.len() as f64;
    c + libm::log1p(m1) / omega
}

/// Gradient of mellowmax with respect to each entry: the softmax weights at
/// `omega`. At `omega = 0` the limit is the constant `1/n` vector, but it is
/// reported as a domain error.
pub fn mellowmax_grad_x(xs: &[f64], omega: f64) -> Result<Vec<f64>> {
    if omega == 0.0 {
        return Err(Error::ZeroOmega("mellowmax gradient"));
    }
    Ok(boltz_weights(xs, omega))
}

/// Derivative of mellowmax with respect to `omega`.
///
/// The quotient rule on `log(mean(e^{omega x})) / omega` reduces to
/// `(boltz_omega(x) - mm_omega(x)) / omega`.
pub fn mellowmax_grad_omega(xs: &[f64], omega: f64) -> Result<f64> {
    if omega == 0.0 {
        return Err(Error::ZeroOmega("mellowmax omega-derivative"));
    }
    Ok((boltz(xs, omega) - mellowmax(xs, omega)) / omega)
}

fn check_eps(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "epsilon", value: eps })
    }
}

fn check_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}

/// Which backup operator to apply, with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", content = "parameter", rename_all = "lowercase"))]
pub enum Operator {
    Max,
    Mean,
    Eps(f64),
    Boltz(f64),
    Mellowmax(f64),
}

impl Operator {
    pub fn eps(eps: f64) -> Result<Self> {
        check_eps(eps)?;
        Ok(Self::Eps(eps))
    }

    pub fn boltz(beta: f64) -> Result<Self> {
        check_finite("beta", beta)?;
        Ok(Self::Boltz(beta))
    }

    pub fn mellowmax(omega: f64) -> Result<Self> {
        check_finite("omega", omega)?;
        Ok(Self::Mellowmax(omega))
    }

    /// Builds an operator from its name (`max`, `mean`, `eps`, `boltz`,
    /// `mellowmax`/`mm`) and optional parameter.
    pub fn from_name(name: &str, parameter: Option<f64>) -> Result<Self> {
        let need = |name: &'static str| parameter.ok_or(Error::InvalidParameter { name, value: f64::NAN });
        match name {
            "max" => Ok(Self::Max),
            "mean" => Ok(Self::Mean),
            "eps" => Self::eps(need("epsilon")?),
            "boltz" => Self::boltz(need("beta")?),
            "mellowmax" | "mm" => Self::mellowmax(need("omega")?),
            _ => Err(Error::InvalidParameter { name: "operator", value: f64::NAN }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Max | Self::Mean => Ok(()),
            Self::Eps(e) => check_eps(e),
            Self::Boltz(b) => check_finite("beta", b),
            Self::Mellowmax(w) => check_finite("omega", w),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Max => "max",
            Self::Mean => "mean",
            Self::Eps(_) => "eps",
            Self::Boltz(_) => "boltz",
            Self::Mellowmax(_) => "mellowmax",
        }
    }

    pub fn parameter(&self) -> Option<f64> {
        match *self {
            Self::Max | Self::Mean => None,
            Self::Eps(p) | Self::Boltz(p) | Self::Mellowmax(p) => Some(p),
        }
    }

    /// Same operator kind with a different parameter. Parameterless kinds
    /// are returned unchanged.
    pub fn with_parameter(&self, p: f64) -> Result<Self> {
        match self {
            Self::Max | Self::Mean => Ok(*self),
            Self::Eps(_) => Self::eps(p),
            Self::Boltz(_) => Self::boltz(p),
            Self::Mellowmax(_) => Self::mellowmax(p),
        }
    }

    /// Whether the operator is a non-expansion in the infinity norm for every
    /// parameter value.
    pub fn is_non_expansion(&self) -> bool {
        !matches!(self, Self::Boltz(_))
    }

    pub fn apply(&self, xs: &[f64]) -> f64 {
        match *self {
            Self::Max => max(xs),
            Self::Mean => mean(xs),
            Self::Eps(e) => e * mean(xs) + (1.0 - e) * max(xs),
            Self::Boltz(b) => boltz(xs, b),
            Self::Mellowmax(w) => mellowmax(xs, w),
        }
    }
}
