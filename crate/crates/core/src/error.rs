use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DexError {
    #[error("characteristic {0} is not a prime")]
    NotPrime(u64),
    #[error("field degree must be at least 1")]
    InvalidDegree,
    #[error("field of order {characteristic}^{degree} is too large (order must fit in 32 bits)")]
    FieldTooLarge { characteristic: u64, degree: u32 },
    #[error("modulus polynomial is not a monic irreducible of degree {0}")]
    BadModulus(u32),
    #[error("element {0} is not a member of the field")]
    InvalidElement(u64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("entropy table must have {expected} entries, found {found}")]
    MissingTableEntries { expected: usize, found: usize },
    #[error("invalid entropy table: {0}")]
    InvalidTable(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{what} limited to {limit}, got {got}")]
    GuardExceeded {
        what: &'static str,
        limit: usize,
        got: usize,
    },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
    #[error("linear program is infeasible")]
    LpInfeasible,
    #[error("linear program is unbounded")]
    LpUnbounded,
    #[error("rates need denominator {needed}, above the limit {limit}")]
    DenominatorTooLarge { needed: u64, limit: u64 },
    #[error("no decodable scheme found in {attempts} attempts; try a larger extension degree")]
    DesignFailed { attempts: usize },
    #[error("operation requires a linear source model")]
    NotLinear,
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, DexError>;
