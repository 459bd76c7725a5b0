use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    NotConverged(String),
    #[error(transparent)]
    Core(alpi::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Core(e) => match e {
                alpi::Error::Io(_) => 4,
                alpi::Error::InvalidArgument(_)
                | alpi::Error::DimensionMismatch { .. }
                | alpi::Error::Json(_)
                | alpi::Error::MazeGeneration { .. } => 2,
                _ => 1,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<alpi::Error> for CliError {
    fn from(e: alpi::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
