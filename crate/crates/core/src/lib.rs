//! Tabular MDP planning and learning with interchangeable softmax backup
//! operators.
//!
//! The crate is organised around the operators in [`ops`]: `max`, `mean`,
//! epsilon-greedy, Boltzmann and mellowmax. Every planner and learner takes an
//! operator (or the matching action-selection policy) as a parameter:
//!
//! - [`gvi`] runs generalized value iteration, enumerates fixed points from a
//!   set of initializations and samples the one-sweep update field.
//! - [`policies`] turns a row of action values into an action distribution,
//!   including the maximum-entropy policy whose expected value equals the
//!   mellowmax of the row.
//! - [`sarsa`] is on-policy tabular SARSA against any [`sarsa::EpisodicEnv`].
//! - [`domains`] generates the benchmark problems.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line front end and parallel fan-out live in the `mellow` crate.
#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod config;
pub mod domains;
pub mod error;
pub mod gvi;
pub mod mdp;
pub mod ops;
pub mod policies;
pub mod roots;
pub mod sarsa;

pub use error::{Error, Result};
pub use mdp::{Mdp, QTable};
pub use ops::Operator;
pub use policies::{ActionDistribution, PolicySpec};
