use thiserror::Error;

use crate::arith::Rat;
use crate::pamap::MapViolation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0} lies outside the phase interval")]
    OutOfPhase(Rat),
    #[error("invalid map: {0}")]
    InvalidMap(#[source] Box<MapViolation>),
    #[error("lap budget exceeded: f^{iterate} needs more than {budget} laps")]
    LapBudget { iterate: usize, budget: usize },
    #[error("digit budget exceeded at time {time}: {digits} digits > {budget}")]
    DigitBudget { time: usize, digits: u64, budget: u64 },
    #[error("no certified nice neighborhood found: {0}")]
    Construction(String),
    #[error("T_{depth}({critical}) is not in the enumerated forest")]
    MissingChainEntry { critical: Rat, depth: usize },
    #[error("{0} is not a critical point of the map")]
    NotCritical(Rat),
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
}

impl From<MapViolation> for Error {
    fn from(v: MapViolation) -> Self {
        Error::InvalidMap(Box::new(v))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
