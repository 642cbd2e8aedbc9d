use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error("genotype must have 40 slots, got {0}")]
    Length(usize),
    #[error("slot {slot} holds {value}, legal range is 0..={max}")]
    SlotOutOfRange { slot: usize, value: u8, max: u8 },
    #[error("cannot parse genotype string {0:?}")]
    Parse(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Encoding(#[from] EncodingError),

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("population size {0} must be even and at least 2")]
    OddPopulation(usize),

    #[error("{name} = {value} is outside [0, 1]")]
    OutOfUnitRange { name: &'static str, value: f64 },

    #[error("quota {quota} exceeds combined subpopulation size {available}")]
    QuotaTooLarge { quota: usize, available: usize },

    #[error("cannot split an iteration budget over zero individuals")]
    NoIndividuals,

    #[error("reference point needs at least one solution")]
    EmptySolutionSet,

    #[error("individual has no objectives set")]
    MissingObjectives,

    #[error("task {task}: {source}")]
    Task {
        task: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("variants disagree on task definitions: {0}")]
    TaskMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
