use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at offset {pos}: expected {expected}, found {found}")]
    Syntax {
        pos: usize,
        expected: String,
        found: String,
    },

    #[error("unknown variable x{index} at offset {pos} (dimension is {dim})")]
    UnknownVariable { pos: usize, index: usize, dim: usize },

    #[error("unknown function `{name}` at offset {pos}")]
    UnknownFunction { pos: usize, name: String },

    #[error("domain error: {what} at {point:?}")]
    Domain { what: String, point: Vec<f64> },

    #[error("metric is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue:e})")]
    NotSpd { point: Vec<f64>, min_eigenvalue: f64 },

    #[error("target metric is not of the form e^(2g) Id: {0}")]
    NotConformalTarget(String),

    #[error("frame is singular at {point:?} (|det w| = {det:e})")]
    SingularFrame { point: Vec<f64>, det: f64 },

    #[error("integration step produced a non-finite value at {point:?}")]
    StepFailure { point: Vec<f64> },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("degenerate surface at {point:?}: |∂1y × ∂2y| = {norm:e}")]
    DegenerateSurface { point: Vec<f64>, norm: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True for errors caused by malformed input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownVariable { .. }
                | Error::UnknownFunction { .. }
                | Error::NotConformalTarget(_)
                | Error::InvalidInput(_)
        )
    }
}
