use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A file did not follow its binary or text layout.
    #[error("format error: {0}")]
    Format(String),

    /// A generator's layer chain or weights are inconsistent.
    #[error("model validation error: {0}")]
    ModelValidation(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("config error: {0}")]
    Config(String),

    /// Input data is missing or unusable (empty dataset, too few TM rows, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Every restart of a solve diverged.
    #[error("solve failed: all {restarts} restarts diverged")]
    SolveFailed { restarts: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dimension(_) => 1,
            _ => 2,
        }
    }
}
