use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A resource-grid layout request is unsatisfiable.
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),

    /// Tensor or matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A scalar argument is out of its valid range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A frequency-domain operation received a time-domain jammer or vice versa.
    #[error("wrong jammer domain: {0}")]
    WrongDomain(String),

    /// Malformed alist text.
    #[error("alist parse error at line {line}: {msg}")]
    AlistParse { line: usize, msg: String },

    /// The parity-check matrix does not have full row rank over GF(2).
    #[error("parity-check matrix has rank {rank} < {rows} rows over GF(2)")]
    RankDeficient { rank: usize, rows: usize },

    /// A configuration file is missing fields or internally inconsistent.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A bisection search range does not bracket the target.
    #[error("search range does not bracket the target: {0}")]
    Bracket(String),

    /// A dense linear-algebra routine failed to converge or factor.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
