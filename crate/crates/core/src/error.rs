use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("zero-norm image in normalized cross correlation")]
    ZeroNorm,
    #[error("KKT state is stale: {0}")]
    StaleState(&'static str),
    #[error("line search failed after {0} backtracks")]
    LineSearchFailed(usize),
    #[error("volume format: {0}")]
    Format(String),
    #[error("bad magic {0:?}, expected \"CLF1\"")]
    BadMagic([u8; 4]),
    #[error("dtype mismatch: expected {expected}, found {found}")]
    DtypeMismatch { expected: &'static str, found: &'static str },
    #[error("header dims only match the payload when read big-endian; volumes must be little-endian")]
    ByteOrder,
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
