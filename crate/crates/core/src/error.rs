use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("negative transition probability {value} at transition[{state}][{action}][{next_state}]")]
    NegativeProbability { state: usize, action: usize, next_state: usize, value: f64 },

    #[error("transition[{state}][{action}] sums to {sum}, expected 1")]
    RowSum { state: usize, action: usize, sum: f64 },

    #[error("discount factor {0} is outside [0, 1)")]
    Discount(f64),

    #[error("{what} index {index} out of range (bound {bound})")]
    IndexOutOfRange { what: &'static str, index: usize, bound: usize },

    #[error("invalid {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("value vector is empty")]
    Empty,

    #[error("{0} is undefined at omega = 0")]
    ZeroOmega(&'static str),

    #[error("action values are all equal; the root equation is degenerate")]
    DegenerateRow,

    #[error("no sign change found after {0} bracket doublings")]
    Bracket(usize),

    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),

    #[error("backup produced a non-finite value at ({state}, {action})")]
    NonFiniteBackup { state: usize, action: usize },

    #[error("trace has {len} episodes but the window needs {window}")]
    TraceTooShort { len: usize, window: usize },

    #[error("malformed layout: {0}")]
    Layout(String),
}
