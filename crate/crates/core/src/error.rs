use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument {name}={value} is outside {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid offspring distribution: {0}")]
    InvalidSpec(String),

    #[error("cannot parse offspring spec {input:?}: {reason}")]
    Parse { input: String, reason: String },

    #[error("offspring law has no mass above N={0}; complete {0}-ary subtrees are trivial")]
    NoMassAboveN(usize),

    #[error("tolerance must be finite and positive, got {0}")]
    InvalidTolerance(f64),

    #[error("bisection failed to shrink the bracket [{lo}, {hi}]")]
    NonConvergence { lo: f64, hi: f64 },

    #[error("inconsistent root: {0}")]
    Inconsistent(String),

    #[error("predicate has the same value ({0}) at both ends of the parameter range")]
    NoSignChange(bool),

    #[error("conditional survival requires a root in (0,1) or the critical N=1 case, got {0}")]
    DegenerateRoot(String),

    #[error("fit window too small: {0}")]
    WindowTooSmall(String),

    #[error("asymptotic model does not apply to class {0}")]
    ClassMismatch(String),

    #[error("{exhausted} of {trials} trials exhausted the node budget (more than 1%)")]
    BudgetExhausted { exhausted: u64, trials: u64 },

    #[error("invalid Monte Carlo configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_unit(name: &'static str, s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: s,
            expected: "[0, 1]",
        })
    }
}
