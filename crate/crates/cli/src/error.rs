use ricker_allee::DynError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Dyn(#[from] DynError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("replayed command exited with status {0}")]
    Replay(i32),
}

impl CliError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad flags or out-of-range parameters, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Dyn(DynError::InvalidParams(_) | DynError::Domain(_)) => 2,
            CliError::Replay(code) => *code,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
