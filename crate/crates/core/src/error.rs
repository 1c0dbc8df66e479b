use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid dimension {0}: must be a power of two or 6")]
    InvalidDimension(usize),

    #[error("state vector has zero norm")]
    ZeroNorm,

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("density matrix trace is {0}, expected 1")]
    BadTrace(f64),

    #[error("density matrix has negative eigenvalue {0:.3e}")]
    NegativeEigenvalue(f64),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("total counts are zero")]
    ZeroCounts,

    #[error("missing measurement basis {0}")]
    MissingBasis(&'static str),

    #[error("input states are not informationally complete")]
    RankDeficient,

    #[error("resonance fixed point not found: {0}")]
    NoFixedPoint(String),

    #[error("missing table row `{0}`")]
    MissingRow(String),

    #[error("malformed data at line {line}, column `{column}`: {message}")]
    Malformed {
        line: u64,
        column: String,
        message: String,
    },

    #[error("empty table")]
    EmptyTable,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
