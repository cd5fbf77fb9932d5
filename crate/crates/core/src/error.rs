use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("degenerate target: variance of y is zero")]
    DegenerateTarget,

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("node {0} is a leaf and has no children")]
    NoChildren(usize),

    #[error("parcel {0} is a singleton and cannot be split")]
    NotSplittable(usize),

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("runs are not comparable: {0}")]
    IncomparableRuns(String),

    #[error("fold {fold} failed: {source}")]
    FoldFailed {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::Parse { .. } | Error::IncomparableRuns(_)
        )
    }
}
