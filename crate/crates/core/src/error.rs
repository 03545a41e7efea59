use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("argument out of domain: {0}")]
    OutOfDomain(String),

    #[error("function is not integrable: {0}")]
    NonIntegrable(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A requested index window cannot be served; `feasible` is the largest
    /// sub-window that can.
    #[error("window [{requested_min}, {requested_max}] not feasible; largest feasible window is {feasible:?}")]
    Window {
        requested_min: i64,
        requested_max: i64,
        feasible: Option<(i64, i64)>,
    },

    #[error("order violation: {0}")]
    OrderViolation(String),

    #[error("unsupported branch: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("dimension {got} exceeds the configured bound {bound}")]
    TooLarge { got: usize, bound: usize },
}

impl Error {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Malformed(_) => "malformed",
            Error::DomainMismatch(_) => "domain_mismatch",
            Error::OutOfDomain(_) => "out_of_domain",
            Error::NonIntegrable(_) => "non_integrable",
            Error::Precondition(_) => "precondition",
            Error::Window { .. } => "window",
            Error::OrderViolation(_) => "order_violation",
            Error::Unsupported(_) => "unsupported",
            Error::Numeric(_) => "numeric",
            Error::TooLarge { .. } => "too_large",
        }
    }
}
