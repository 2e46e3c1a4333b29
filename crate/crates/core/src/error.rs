use std::path::PathBuf;

/// Error type shared by every module in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A regression design matrix was singular (for example all predictor
    /// values equal), so no slope is defined.
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    /// A sample was unusable for the requested estimator (too short, or every
    /// lagged value zero).
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// A scalar equation had no root inside the maximal search bracket.
    #[error("no root: {0}")]
    NoRoot(String),

    /// A numerical routine produced a non-finite intermediate value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Reading or writing an output file failed.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// A configuration file or flag value could not be parsed.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Exit code the CLI maps this error to: 1 for validation problems the
    /// user can fix in the invocation, 2 for numerical or I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => 1,
            Error::DegenerateDesign(_)
            | Error::DegenerateSample(_)
            | Error::NoRoot(_)
            | Error::Numerical(_)
            | Error::Io { .. } => 2,
        }
    }
}
