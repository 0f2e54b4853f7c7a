use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The query is well-formed but not supported for this body representation.
    #[error("unsupported query: {0}")]
    Unsupported(String),

    /// An integrand produced a non-finite value.
    #[error("non-finite integrand value {value} at node {index} (direction {direction:?})")]
    Evaluation {
        index: usize,
        direction: Vec<f64>,
        value: f64,
    },

    /// The projection function fell below the positivity guard.
    #[error("projection function {value:e} below positivity guard at direction {direction:?}")]
    Positivity { direction: Vec<f64>, value: f64 },

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("no convergence: {message} (residual {residual:e})")]
    Convergence { message: String, residual: f64 },

    /// A certified inequality was violated beyond tolerance.
    #[error("inequality violated: {link} (lhs {lhs}, rhs {rhs}, tolerance {tolerance:e}); terms {terms:?}")]
    InequalityViolation {
        link: String,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
        terms: Vec<(String, f64)>,
    },

    /// Malformed body description.
    #[error("schema error at {path} (line {line}, column {column}): {message}")]
    Schema {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// Facet data does not close up: the area-weighted normals do not sum to zero.
    #[error("polytope not closed: |sum a_i nu_i| = {defect_norm:e} (relative {relative:e}), defect vector {defect:?}")]
    Closure {
        defect: Vec<f64>,
        defect_norm: f64,
        relative: f64,
    },

    #[error("body generation failed: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    /// True for failures caused by bad input or configuration rather than mathematics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Unsupported(_)
                | Error::Schema { .. }
                | Error::Closure { .. }
                | Error::Generation(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}
