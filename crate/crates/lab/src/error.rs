use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: row {row}, column `{column}`: {message}")]
    Csv {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),
    #[error("{failed} of {total} cells failed")]
    PartialGrid { failed: usize, total: usize },
    #[error(transparent)]
    Core(#[from] qklab_core::Error),
}

pub type LabResult<T> = Result<T, LabError>;

impl LabError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Self::Json {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 1 config or input error, 2 partial grid,
    /// 3 internal numerical inconsistency.
    pub fn exit_code(&self) -> i32 {
        use qklab_core::Error as E;
        match self {
            Self::PartialGrid { .. } | Self::MissingArtifacts(_) => 2,
            Self::Core(E::Numerical(_) | E::NotSymmetric(_) | E::NotPositiveSemiDefinite(_) | E::Singular) => 3,
            Self::Core(E::NoConvergence(_)) => 3,
            _ => 1,
        }
    }
}
