use thiserror::Error;

pub type Result<T> = std::result::Result<T, HeckeError>;

/// Error taxonomy for the whole workspace. The CLI maps each variant to a
/// distinct exit code, so keep variants coarse and stable.
#[derive(Debug, Error)]
pub enum HeckeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An enumeration would visit more representatives than the configured budget.
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    /// A result could not be certified at the requested modulus because too much
    /// p-adic precision was lost on the way. Raised instead of returning wrong digits.
    #[error("p-adic precision exhausted: {0}")]
    PrecisionStarved(String),

    /// A depth/stabilization loop hit its configured maximum without the answer
    /// becoming stationary.
    #[error("depth window failed to stabilize: {0}")]
    DepthUnstable(String),

    /// An internal invariant that the underlying theory guarantees was violated
    /// (e.g. a transported class not proportional to the canonical generator).
    #[error("structural invariant violated: {0}")]
    Structural(String),

    #[error("cache I/O: {0}")]
    Cache(#[from] std::io::Error),
}
