use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A joint-table cell came out negative for the given dependence parameters.
    #[error("infeasible parameters: cell {cell} = {value:.3e} < 0")]
    InfeasibleCell { cell: String, value: f64 },

    #[error("invalid probability `{name}` = {value} (must lie in [0, 1])")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("invalid redistribution policy: {0}")]
    InvalidPolicy(String),

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub(crate) fn check_prob(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}
