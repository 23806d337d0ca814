use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid problem field `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] stabilis::Error),
}

impl CliError {
    /// 1 for anything wrong with the invocation or its input, 2 for solver
    /// and KKT failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(stabilis::Error::DimensionMismatch(_)) => 1,
            CliError::Core(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Parse { .. } => "parse",
            CliError::Validation { .. } => "validation",
            CliError::Io { .. } => "io",
            CliError::Core(stabilis::Error::NotKKT(_)) => "not_kkt",
            CliError::Core(
                stabilis::Error::MaxIterExceeded { .. } | stabilis::Error::LinearSolveFailure | stabilis::Error::SolveFailuresExceeded { .. },
            ) => "solve_failure",
            CliError::Core(_) => "numerical",
        }
    }
}
