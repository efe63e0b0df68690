use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed table at row {row}: {message}")]
    Table { row: usize, message: String },

    #[error("column '{name}' declared in schema is missing from the header")]
    MissingColumn { name: String },

    #[error("header column {column} ('{name}') is duplicated")]
    DuplicateHeader { name: String, column: usize },

    #[error("header column {column} ('{name}') is not declared in the schema")]
    UndeclaredColumn { name: String, column: usize },

    #[error(
        "row {row}, column {column} ('{attribute}'): expected {expected} fields, found {found}"
    )]
    RaggedRow {
        row: usize,
        column: usize,
        attribute: String,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {column} ('{attribute}'): missing value")]
    MissingValue {
        row: usize,
        column: usize,
        attribute: String,
    },

    #[error("row {row}, column {column} ('{attribute}'): '{token}' is not a finite number")]
    NonNumeric {
        row: usize,
        column: usize,
        attribute: String,
        token: String,
    },

    #[error("row {row}, column {column} ('{attribute}'): level '{token}' is not mapped by the configuration")]
    UnknownLevel {
        row: usize,
        column: usize,
        attribute: String,
        token: String,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown attribute '{0}'")]
    UnknownAttribute(String),

    #[error("condition on '{attribute}' does not match its kind ({kind})")]
    ConditionMismatch { attribute: String, kind: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset must be normalized first")]
    NotNormalized,

    #[error("dataset is already normalized")]
    AlreadyNormalized,

    #[error("record {0} is not part of the dataset")]
    RecordNotFound(usize),

    #[error("both groups need at least one record to fit a propensity model")]
    SingleGroup,

    #[error("log-likelihood became non-finite at iteration {iteration}")]
    NonFiniteLikelihood { iteration: usize },

    #[error("covariate selection is empty; list covariates explicitly in the configuration (expert override)")]
    EmptySelection,

    #[error("no record with a negative decision to copy a decision value from")]
    NoNegativeValue,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::File {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
