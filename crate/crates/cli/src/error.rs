use std::path::{Path, PathBuf};

/// Exit status for a completed run.
pub const EXIT_OK: i32 = 0;
/// Malformed input, bad arguments or any other failure.
pub const EXIT_INPUT: i32 = 1;
/// Output was written but at least one fit did not converge.
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mdpde::Error),

    #[error("{}: line {line}: {message}", path.display())]
    File { path: PathBuf, line: usize, message: String },

    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    /// Attaches the file name to errors raised while reading it.
    pub fn in_file(path: &Path, err: mdpde::Error) -> Self {
        match err {
            mdpde::Error::Parse { line, message } => Self::File { path: path.to_path_buf(), line, message },
            other => Self::Invalid { path: path.to_path_buf(), message: other.to_string() },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
