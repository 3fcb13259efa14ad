use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid qubit sites: {0}")]
    InvalidSites(String),
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (defect {0:e})")]
    NotUnitary(f64),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("time {time} is not on the step grid of dt = {dt}")]
    OffGrid { time: f64, dt: f64 },
    #[error("overlapping gate segments on qubit {qubit} at t = {time}")]
    OverlappingSegments { qubit: usize, time: f64 },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("schedule file line {line}: {message}")]
    ScheduleParse { line: usize, message: String },
    #[error("postselection impossible: success probability {probability:e}")]
    PostselectionImpossible { probability: f64 },
    #[error("postselection impossible for inputs {labels:?}")]
    PostselectionFailedInputs { labels: Vec<String> },
    #[error("missing checkpoint {0}")]
    MissingCheckpoint(&'static str),
    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },
    #[error("missing grid coverage: {0}")]
    MissingCoverage(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Short stable identifier used in the CLI's machine-readable error line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidSites(_) => "invalid_sites",
            Error::NotHermitian(_) => "not_hermitian",
            Error::NotUnitary(_) => "not_unitary",
            Error::InvalidState(_) => "invalid_state",
            Error::OutOfRange(_) => "out_of_range",
            Error::OffGrid { .. } => "off_grid",
            Error::OverlappingSegments { .. } => "overlapping_segments",
            Error::InvalidSchedule(_) => "invalid_schedule",
            Error::ScheduleParse { .. } => "schedule_parse",
            Error::PostselectionImpossible { .. } | Error::PostselectionFailedInputs { .. } => {
                "postselection_impossible"
            }
            Error::MissingCheckpoint(_) => "missing_checkpoint",
            Error::Config { .. } => "config",
            Error::MissingCoverage(_) => "missing_coverage",
            Error::Io(_) => "io",
        }
    }
}
