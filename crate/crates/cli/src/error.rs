use thiserror::Error;

use mnr::baselines::BaselineError;
use mnr::bench::BenchError;
use mnr::datagen::DataError;
use mnr::mnr::MnrError;

/// Failure of a subcommand. Each variant maps to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{failed} acceptance band(s) not met")]
    Bands { failed: usize },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
            CliError::Bands { .. } => 5,
        }
    }

    /// Prefixes the message with where the error arose.
    pub fn with_context(self, ctx: &str) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{ctx}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{ctx}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{ctx}: {m}")),
            other => other,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

impl From<MnrError> for CliError {
    fn from(e: MnrError) -> Self {
        match e {
            MnrError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            e if e.is_numerical() => CliError::Numeric(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::InvalidLevel(_) | BaselineError::WrongFamily(_) => {
                CliError::Usage(e.to_string())
            }
            BaselineError::DegenerateProjection { .. } | BaselineError::Select(_) => {
                CliError::Numeric(e.to_string())
            }
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Json(_) => CliError::Data(e.to_string()),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}
