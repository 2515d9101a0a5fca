use linkformer_bench::BenchError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("cannot write {path}: {source}")]
    Write {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] linkformer_core::Error),

    #[error(transparent)]
    Bench(#[from] BenchError),
}

impl CliError {
    /// 1 for bad input, 2 for numeric failure, 3 for a failed check.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) | CliError::Bench(BenchError::Core(e)) if e.is_numeric() => 2,
            CliError::CheckFailed(_) | CliError::Bench(BenchError::Mismatch { .. }) => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
