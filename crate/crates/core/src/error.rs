use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    #[error("matrix is singular (smallest eigenvalue {min_eigenvalue:e})")]
    Singular { min_eigenvalue: f64 },

    #[error("Jacobi iteration did not converge: off-diagonal residual {residual:e} after {sweeps} sweeps")]
    NoConvergence { residual: f64, sweeps: usize },

    #[error("no orthonormal complement: {supplied} vectors already span dimension {dim}")]
    EmptyComplement { supplied: usize, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value {value} at row {row}, column {column} lies outside [-{bound}, {bound}]")]
    BoundViolation {
        row: usize,
        column: usize,
        value: f64,
        bound: f64,
    },

    #[error("mean coordinate {coordinate} = {value} lies outside [-{bound}, {bound}]")]
    MeanOutOfBounds {
        coordinate: usize,
        value: f64,
        bound: f64,
    },

    #[error("spherical sampler stalled after {proposals} proposals (q = {q}, eps_step = {eps_step}, spectral spread = {spread:e})")]
    SamplerStall {
        proposals: u64,
        q: usize,
        eps_step: f64,
        spread: f64,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True when input data violate the declared bound m.
    pub fn is_bound_violation(&self) -> bool {
        matches!(self, Error::BoundViolation { .. } | Error::MeanOutOfBounds { .. })
    }

    /// True for failures of the numerical kernels rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveSemiDefinite { .. }
                | Error::Singular { .. }
                | Error::NoConvergence { .. }
                | Error::SamplerStall { .. }
        )
    }
}
