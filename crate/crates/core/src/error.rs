use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("evolution blow-up at t = {t:.6e}: {reason}")]
    Blowup { t: f64, reason: String },
    #[error("matching failure: {0}")]
    Matching(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("upstream hash mismatch for {file}: expected {expected}, found {found}")]
    HashMismatch { file: String, expected: String, found: String },
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Config(_) | Error::Toml(_) | Error::HashMismatch { .. } => 2,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => 2,
            Error::Numerical(_) => 3,
            Error::Blowup { .. } => 4,
            Error::Matching(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn numerical<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Numerical(msg.into()))
}
