use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("word {0} is not admissible")]
    Inadmissible(String),
    #[error("enumeration budget exceeded: {needed} candidates > budget {budget}")]
    Budget { needed: u128, budget: u128 },
    #[error("no irreducibility witness found up to length {0}")]
    NotIrreducible(usize),
    #[error("potential is not summable: {0}")]
    NotSummable(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("degenerate: {0}")]
    Degenerate(String),
    #[error("radius {r} is below the resolvable minimum {min}")]
    Unresolvable { r: f64, min: f64 },
    #[error("ladder infeasible: {0}")]
    Infeasible(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
