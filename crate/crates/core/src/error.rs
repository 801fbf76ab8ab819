use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column {col}: cannot parse {value:?} as a real number")]
    Parse { row: usize, col: usize, value: String },

    #[error("row {row}, column {col}: non-finite value")]
    NonFinite { row: usize, col: usize },

    #[error("expected binary labels, found {found} distinct values")]
    LabelCount { found: usize },

    #[error("label column {0:?} not found")]
    MissingLabelColumn(String),

    #[error("positive label {0:?} does not occur in the label column")]
    UnknownPositiveLabel(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("cannot draw {draw} distinct indices: only {positive} have positive weight out of {population}")]
    InsufficientSupport {
        draw: usize,
        positive: usize,
        population: usize,
    },

    #[error("feature width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("stopping criterion observed iteration {got} after {last}")]
    OutOfOrder { last: usize, got: usize },

    #[error("tree has no recorded node statistics")]
    MissingNodeStats,
}
