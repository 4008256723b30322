use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Configuration problem; `path` is the dotted location inside the document.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Training produced a non-finite loss or gradient.
    #[error("numerical abort at iteration {iteration}: {detail}")]
    NumericalAbort { iteration: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
