use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("malformed result file: {0}")]
    Format(String),
    #[error("{failed} of {total} trials failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error(transparent)]
    Core(#[from] isac_hbf::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    TomlRead(#[from] toml::de::Error),
    #[error(transparent)]
    TomlWrite(#[from] toml::ser::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Invalid(msg.into())
}

pub(crate) fn format_error(msg: impl Into<String>) -> HarnessError {
    HarnessError::Format(msg.into())
}
