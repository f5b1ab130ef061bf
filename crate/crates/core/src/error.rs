use thiserror::Error;

#[derive(Debug, Error)]
pub enum CloccsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid cohort {{{g},{r}}}")]
    InvalidCohort { g: u32, r: u32 },

    #[error("{path}: line {line}: {message}")]
    Data { path: String, line: usize, message: String },

    #[error("invalid dataset: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CloccsError> = std::result::Result<T, E>;

impl CloccsError {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::InvalidParameter(_) | Self::Config(_) => 2,
            Self::Data { .. } | Self::Validation(_) | Self::Io(_) | Self::Csv(_) | Self::InvalidCohort { .. } => 3,
            Self::Numerical(_) => 4,
        }
    }
}
