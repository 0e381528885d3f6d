use std::path::PathBuf;

/// Process exit codes; a stable contract for harnesses.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const BACKEND: i32 = 3;
    pub const DATA: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] triage_core::Error),
    #[error("backend unavailable for issue `{issue_id}` after {attempts} attempts: {message}")]
    BackendUnavailable {
        issue_id: String,
        attempts: u32,
        message: String,
    },
    #[error("backend protocol error for issue `{issue_id}`: {message}")]
    Protocol { issue_id: String, message: String },
    #[error("run {run_index} aborted: {failed} of {total} requests failed (limit {limit})")]
    RunAborted {
        run_index: usize,
        failed: usize,
        total: usize,
        limit: f64,
    },
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        BenchError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) => exit::USAGE,
            BenchError::BackendUnavailable { .. }
            | BenchError::Protocol { .. }
            | BenchError::RunAborted { .. } => exit::BACKEND,
            BenchError::Core(triage_core::Error::Config(_)) => exit::USAGE,
            BenchError::Io { .. }
            | BenchError::Record { .. }
            | BenchError::Format { .. }
            | BenchError::Core(_) => exit::DATA,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
