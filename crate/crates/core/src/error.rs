use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("design matrix is singular: column(s) {columns:?} are collinear")]
    SingularDesign { columns: Vec<String> },

    #[error("insufficient data: {observations} observations for {regressors} regressors")]
    InsufficientData {
        observations: usize,
        regressors: usize,
    },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("missing regressor {0:?} in observation")]
    MissingRegressor(String),

    #[error("unknown format {requested:?}; supported: {supported}")]
    UnknownFormat {
        requested: String,
        supported: String,
    },

    #[error("empty input: {0}")]
    Empty(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
