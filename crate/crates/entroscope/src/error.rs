use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A dataset line that is not valid JSON for the expected schema.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A record that parsed but violates a dataset invariant.
    #[error("prompt {prompt_id:?}: {message}")]
    Dataset { prompt_id: String, message: String },

    /// Invalid argument or configuration outside any particular record.
    #[error("{0}")]
    Domain(String),
}

impl Error {
    pub fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }

    pub fn dataset(prompt_id: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Dataset {
            prompt_id: prompt_id.into(),
            message: message.into(),
        }
    }
}
