use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("infeasible profile: {0}")]
    InfeasibleProfile(String),
    #[error("invalid cost oracle: {0}")]
    InvalidCostOracle(String),
    #[error("not a basis: {0}")]
    NotABasis(String),
    #[error("not in basis: {0}")]
    NotInBasis(String),
    #[error("profile is not enforceable: {0}")]
    NotEnforceable(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("disconnected: {0}")]
    Disconnected(String),
    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),
    #[error("graph is not series-parallel: {0}")]
    NotSeriesParallel(String),
    #[error("too many paths for player {player} (limit {limit})")]
    TooManyPaths { player: usize, limit: usize },
    #[error("no tight alternative: {0}")]
    NoTightAlternative(String),
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! invariant {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::InternalInvariant(format!($($arg)+)));
        }
    };
}
pub(crate) use invariant;
