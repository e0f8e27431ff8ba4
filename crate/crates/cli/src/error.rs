use std::fmt;

/// Exit code for a configuration or validation problem.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for a failure inside a pipeline stage.
pub const EXIT_STAGE: i32 = 1;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Stage { stage: String, message: String },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn stage(stage: &str, err: impl fmt::Display) -> Self {
        Self::Stage { stage: stage.to_string(), message: err.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Stage { .. } => EXIT_STAGE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "config error: {m}"),
            Self::Stage { stage, message } => write!(f, "stage `{stage}` failed: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Tags a library error with the stage it came from.
pub trait StageContext<T> {
    fn stage(self, stage: &str) -> CliResult<T>;
}

impl<T, E: fmt::Display> StageContext<T> for std::result::Result<T, E> {
    fn stage(self, stage: &str) -> CliResult<T> {
        self.map_err(|e| CliError::stage(stage, e))
    }
}
