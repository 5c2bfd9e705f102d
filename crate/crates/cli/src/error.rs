use thiserror::Error;

use hfit::data::DataError;
use hfit::de::DeError;
use hfit::mogp::MogpError;
use hfit::tree::TreeError;

/// One failed configuration check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn list(errors: &[FieldError]) -> String {
    errors.iter().map(|e| format!("\n  {e}")).collect()
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:{}", list(.0))]
    Config(Vec<FieldError>),
    #[error("cannot parse {path}: {message}")]
    ConfigSyntax { path: String, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("cannot parse model {path} at byte {offset}: {message}")]
    ModelSyntax { path: String, offset: usize, message: String },
    #[error("model {path}: {message}")]
    Model { path: String, message: String },
    #[error("model expects {expected} features ({names}), dataset has {found}")]
    FeatureCount { expected: usize, names: String, found: usize },
    #[error("{0}")]
    NoFront(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Structure(#[from] MogpError),
    #[error(transparent)]
    Tuning(#[from] DeError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("{0}")]
    Report(String),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ConfigSyntax { .. } => 3,
            CliError::Data(_) | CliError::FeatureCount { .. } => 4,
            CliError::ModelSyntax { .. } | CliError::Model { .. } => 5,
            CliError::NoFront(_) => 6,
            CliError::Io { .. } | CliError::Csv(_) | CliError::Report(_) => 7,
            CliError::Structure(_) | CliError::Tuning(_) | CliError::Tree(_) => 8,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
