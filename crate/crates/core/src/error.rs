use thiserror::Error;

/// Errors raised by the equilibrium engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Parameters violate a model invariant (H > M, lambda in [0, 1], ...).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A root could not be bracketed or an iteration did not converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The requested design or equilibrium does not exist for these inputs.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A shape property assumed by a design rule was contradicted on a grid.
    #[error("shape check failed: {0}")]
    Shape(String),

    /// Distribution specification could not be parsed or loaded.
    #[error("distribution spec: {0}")]
    Spec(String),
}

impl Error {
    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_) | Error::Domain(_) | Error::Spec(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
