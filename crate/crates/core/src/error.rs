use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("label index {index} out of range for {classes} classes")]
    InvalidLabel { index: usize, classes: usize },

    #[error("entry {position} of a binary vector is {value}, expected 0 or 1")]
    NotBinary { position: usize, value: u8 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("enumeration too large: {inputs} inputs and {classes} classes (limit 16 and 10)")]
    EnumerationTooLarge { inputs: usize, classes: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("numerical failure at iteration {iteration}: {detail}")]
    NumericalFailure { iteration: usize, detail: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
