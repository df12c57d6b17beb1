use thiserror::Error;

/// Errors produced while ingesting data, fitting models, or predicting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at data row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("domain error at data row {row}, column `{column}`: {message}")]
    Domain {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing value at data row {row}, column `{column}`")]
    Missing { row: usize, column: String },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("root node inadmissible: {0}")]
    RootInadmissible(String),

    #[error("prediction error: {0}")]
    Prediction(String),

    #[error("model error: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
