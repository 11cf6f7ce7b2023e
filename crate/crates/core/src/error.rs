use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("expected {expected} coefficients (m^p), got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("coefficient {index} is not finite")]
    NonFinite { index: usize },

    #[error("order-{order} tensor at resolution {resolution} needs {entries} entries, budget is {budget}")]
    BudgetExceeded {
        order: usize,
        resolution: usize,
        entries: u128,
        budget: usize,
    },

    #[error("resolution mismatch: {left} vs {right}")]
    ResolutionMismatch { left: usize, right: usize },

    #[error("order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("contraction index r={r} outside 0..=min({p}, {q})")]
    ContractionRange { r: usize, p: usize, q: usize },

    #[error("model mismatch between operands")]
    ModelMismatch,

    #[error("kernel is identically zero")]
    ZeroKernel,

    #[error("free variance <f, f*> is not positive")]
    NonPositiveVariance,

    #[error("kernel is not symmetric")]
    NotSymmetric,

    #[error("kernel is not mirror symmetric")]
    NotMirrorSymmetric,

    #[error("kernel is not normalized to unit variance")]
    NotNormalized,

    #[error("kernel has mass on diagonal cells; refine and take the off-diagonal part first")]
    DiagonalSupport,

    #[error("tuple is not in class {expected}")]
    WrongClass { expected: &'static str },

    #[error("result is irrational: {0}")]
    Irrational(&'static str),

    #[error("oracle cap exceeded: {0}")]
    OracleCap(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Budget,
    Precondition,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::BudgetExceeded { .. } | Error::OracleCap(_) => ErrorKind::Budget,
            Error::ZeroKernel
            | Error::NonPositiveVariance
            | Error::NotSymmetric
            | Error::NotMirrorSymmetric
            | Error::NotNormalized
            | Error::DiagonalSupport
            | Error::Irrational(_) => ErrorKind::Precondition,
            _ => ErrorKind::Input,
        }
    }
}
