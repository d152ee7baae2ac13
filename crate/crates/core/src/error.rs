//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("constraint `{0}` is violated with a zero subgradient; its set is empty")]
    InfeasibleConstraint(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("zero step vector where a direction is required")]
    DegenerateStep,
    #[error("surrogate direction collapsed to zero")]
    DegenerateSurrogate,
    #[error("the level-1 feasibility problem could not be solved within the iteration cap")]
    NoFeasibleStart,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
