use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing metadata tag <{0}>")]
    MissingMetadata(&'static str),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid demand: {0}")]
    InvalidDemand(String),

    #[error("invalid weight matrix: {0}")]
    InvalidWeights(String),

    #[error("origin {origin} cannot reach destination {destination}")]
    Unreachable { origin: usize, destination: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
