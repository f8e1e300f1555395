use thiserror::Error;

/// Errors raised across the simulation stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid Pauli label: {0}")]
    InvalidLabel(String),
    #[error("operator is not Hermitian: {0}")]
    NonHermitian(String),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("perturbation theory breaks down: {0}")]
    Singular(String),
    #[error("engine failure: {0}")]
    Engine(String),
    #[error("fit failed: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Prefix the message with `ctx`, keeping the variant.
    pub fn with_context(self, ctx: &str) -> Self {
        match self {
            Error::Dimension(m) => Error::Dimension(format!("{ctx}: {m}")),
            Error::InvalidLabel(m) => Error::InvalidLabel(format!("{ctx}: {m}")),
            Error::NonHermitian(m) => Error::NonHermitian(format!("{ctx}: {m}")),
            Error::InvalidState(m) => Error::InvalidState(format!("{ctx}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{ctx}: {m}")),
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::Singular(m) => Error::Singular(format!("{ctx}: {m}")),
            Error::Engine(m) => Error::Engine(format!("{ctx}: {m}")),
            Error::Fit(m) => Error::Fit(format!("{ctx}: {m}")),
        }
    }

    /// Configuration-class errors map to CLI exit code 2, the rest to 3.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidLabel(_) | Error::Dimension(_))
    }
}
