use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EscapeError {
    #[error("rate must be strictly positive, got {0}")]
    NonPositiveRate(f64),
    #[error("total probability mass is {0}, expected 1")]
    MassNotOne(f64),
    #[error("rational transform is unstable: denominator root {0} has nonnegative real part")]
    UnstableRationalTransform(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("query out of range: {0}")]
    Range(String),
    #[error("polynomial has a vanishing leading coefficient or degree zero")]
    DegenerateLeadingCoefficient,
    #[error("multiple roots detected near {0}")]
    MultipleRootsDetected(String),
    #[error("confluent roots are not supported by this formula")]
    ConfluentRootsUnsupported,
    #[error("non-finite transform value at s = {0}")]
    NonFinite(String),
    #[error("operator is not contractive (L = {0})")]
    NotContractive(f64),
    #[error("Picard iteration exceeded {0} iterations")]
    IterationCapExceeded(usize),
    #[error("quadrature under-resolved: {0}")]
    QuadratureUnderResolved(String),
    #[error("interarrival tail underflows at z = {0}")]
    TailUnderflow(f64),
    #[error("route mismatch: {0}")]
    RoutingMismatch(String),
    #[error("unsupported severity law: {0}")]
    UnsupportedSeverity(String),
    #[error("terminal system is singular (relative pivot {0:e})")]
    SingularThetaAtB(f64),
    #[error("solvability condition violated: {0}")]
    ConditionViolated(String),
    #[error("at least {0} simulated paths hit the event cap")]
    NonTermination(u64),
}

/// Coarse grouping used by front ends to map errors to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Routing,
    Numerics,
    Censoring,
}

impl EscapeError {
    pub fn class(&self) -> ErrorClass {
        use EscapeError::*;
        match self {
            NonPositiveRate(_) | MassNotOne(_) | UnstableRationalTransform(_) | InvalidParameter(_)
            | Range(_) => ErrorClass::Config,
            RoutingMismatch(_) | UnsupportedSeverity(_) | ConditionViolated(_) => ErrorClass::Routing,
            NonTermination(_) => ErrorClass::Censoring,
            _ => ErrorClass::Numerics,
        }
    }
}

pub type Result<T> = std::result::Result<T, EscapeError>;
