//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or combination.
    #[error("config error: {0}")]
    Config(String),

    /// Matrix/vector dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// A computation produced NaN/inf or diverged.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A dataset view selected zero rows.
    #[error("empty selection: {0}")]
    EmptySelection(String),

    /// A normal class required for the pretext task is absent.
    #[error("missing class: {0}")]
    MissingClass(String),

    /// An operation that needs >= 2 training environments got one.
    #[error("single environment: {0}")]
    SingleEnv(String),

    /// Intra-label cross-env pairing is impossible.
    #[error("pairing error: {0}")]
    Pairing(String),

    /// Fewer training rows than a detector's minimum.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// ROC-AUC needs both classes present.
    #[error("labels contain one class only; ROC-AUC undefined")]
    OneClassOnly,

    /// A mean-AD column is missing a detector entry.
    #[error("missing detector in column: {0}")]
    MissingDetector(String),

    /// A vector with norm < 1e-12 cannot be L2-normalized.
    #[error("zero vector: norm {norm:.3e} below 1e-12")]
    ZeroVector { norm: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed on-disk artifact (dataset, model, table, config).
    #[error("parse error: {0}")]
    Parse(String),

    /// A benchmark grid cell failed; carries its coordinates.
    #[error("cell (pretrainer={pretrainer}, detector={detector}, seed={seed}) failed: {source}")]
    Cell {
        pretrainer: String,
        detector: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}
