use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point {point:?} lies outside the field domain")]
    DomainViolation { point: [f64; 3] },
    #[error("non-finite value produced: {0}")]
    NumericFailure(String),
    #[error("gradient norm {norm:e} below cutoff (critical point of the field)")]
    SingularGradient { norm: f64 },
    #[error("singular gradient at sample {index}: norm {norm:e}")]
    SingularSample { index: usize, norm: f64 },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("projection to the surface did not converge after {iterations} iterations (|f| = {residual:e})")]
    ProjectionFailure { iterations: usize, residual: f64 },
    #[error("field has no zero crossing inside its domain")]
    EmptyZeroSet,
    #[error("region unreachable: {found} of {requested} samples after {trials} trials")]
    RegionUnreachable { requested: usize, found: usize, trials: usize },
    #[error("linear system is singular or not positive definite")]
    SingularSystem,
    #[error("constraint basis has zero norm or is linearly dependent")]
    DegenerateConstraint,
    #[error("samples lack area weights")]
    MissingWeights,
    #[error("samples lack curvature")]
    MissingCurvature,
    #[error("no target samples remain")]
    EmptyTarget,
    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: &'static str, reason: String },
    #[error("fit failed: residual {residual:e} after {iterations} iterations")]
    FitFailure { residual: f64, iterations: usize },
    #[error("optimization diverged at step {step}: objective {objective:e}")]
    OptimizationFailure { step: usize, objective: f64 },
    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { field, reason: reason.into() }
    }

    pub fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration { iteration, source: alloc::boxed::Box::new(self) }
    }

    /// Innermost error, stripping iteration context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::invalid(field, reason)
}
