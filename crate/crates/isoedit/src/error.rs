use std::path::PathBuf;

use serde_json::json;

/// Errors raised by the file formats, CLI and service.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] isoedit_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// Malformed input document; `field` is the path to the offending value.
    #[error("invalid {document} at `{field}`: {message}")]
    Parse { document: &'static str, field: String, message: String },
    #[error("{0}")]
    Format(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{0}` is busy with another operation")]
    Busy(String),
    #[error("{0}")]
    Conflict(String),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    pub fn format(message: impl Into<String>) -> Self {
        AppError::Format(message.into())
    }

    /// True for errors caused by the caller's input rather than the computation.
    pub fn is_invalid_input(&self) -> bool {
        match self {
            AppError::Core(e) => matches!(e.root(), isoedit_core::Error::InvalidArgument { .. } | isoedit_core::Error::Shape { .. }),
            AppError::Parse { .. } | AppError::Format(_) => true,
            _ => false,
        }
    }

    pub fn kind(&self) -> &'static str {
        use isoedit_core::Error as E;
        match self {
            AppError::Core(e) => match e.root() {
                E::DomainViolation { .. } => "domain_violation",
                E::NumericFailure(_) => "numeric_failure",
                E::SingularGradient { .. } | E::SingularSample { .. } => "singular_gradient",
                E::Shape { .. } => "shape_mismatch",
                E::ProjectionFailure { .. } => "projection_failure",
                E::EmptyZeroSet => "empty_zero_set",
                E::RegionUnreachable { .. } => "region_unreachable",
                E::SingularSystem => "singular_system",
                E::DegenerateConstraint => "degenerate_constraint",
                E::MissingWeights => "missing_weights",
                E::MissingCurvature => "missing_curvature",
                E::EmptyTarget => "empty_target",
                E::InvalidArgument { .. } => "invalid_argument",
                E::FitFailure { .. } => "fit_failure",
                E::OptimizationFailure { .. } => "optimization_failure",
                E::AtIteration { .. } => unreachable!("root strips iteration context"),
            },
            AppError::Io { .. } => "io",
            AppError::Parse { .. } => "parse",
            AppError::Format(_) => "format",
            AppError::UnknownSession(_) => "unknown_session",
            AppError::Busy(_) => "busy",
            AppError::Conflict(_) => "conflict",
        }
    }

    /// Offending field for input errors.
    pub fn field(&self) -> Option<String> {
        match self {
            AppError::Core(e) => match e.root() {
                isoedit_core::Error::InvalidArgument { field, .. } => Some((*field).to_string()),
                _ => None,
            },
            AppError::Parse { field, .. } => Some(field.clone()),
            _ => None,
        }
    }

    /// Process exit code: 2 for invalid input, 3 for computation failures, 4 for IO.
    pub fn exit_code(&self) -> i32 {
        if self.is_invalid_input() {
            2
        } else if matches!(self, AppError::Io { .. }) {
            4
        } else {
            3
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut err = json!({ "kind": self.kind(), "message": self.to_string() });
        if let Some(f) = self.field() {
            err["field"] = json!(f);
        }
        if let AppError::Core(isoedit_core::Error::AtIteration { iteration, .. }) = self {
            err["iteration"] = json!(iteration);
        }
        json!({ "error": err })
    }
}

/// Parse JSON, reporting the path of the first offending value.
pub fn parse_json<T: serde::de::DeserializeOwned>(document: &'static str, text: &str) -> AppResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        AppError::Parse { document, field, message: e.into_inner().to_string() }
    })
}
