use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unknown {kind} entity `{id}`")]
    UnknownEntity { kind: &'static str, id: String },

    #[error("contradictory filter: attribute `{attr}` is both required and forbidden to equal `{value}`")]
    ContradictoryFilter { attr: String, value: String },

    #[error("invalid relation: {0}")]
    InvalidRelation(String),

    #[error("value `{value}` is outside the range of attribute `{attr}`")]
    ValueOutOfRange { attr: String, value: String },

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("enumeration of {product} tuples exceeds the cap of {cap}")]
    CapExceeded { product: u128, cap: u64 },

    #[error("fraction {0} is outside the permitted range")]
    InvalidFraction(f64),

    #[error("value `{value}` of attribute `{attr}` falls outside every bin")]
    Binning { attr: String, value: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("record length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("cluster count {k} exceeds the {distinct} distinct records")]
    TooManyClusters { k: usize, distinct: usize },

    #[error("no valid cluster count in [{k_min}, {k_max}]")]
    NoValidK { k_min: usize, k_max: usize },

    #[error("{path}: line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("malformed document: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
