use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Mesh,
    Assembly,
    Solver,
}

#[derive(Debug, Error)]
pub enum SemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("jacobi parameters alpha = {alpha}, beta = {beta} must both exceed -1")]
    JacobiParams { alpha: f64, beta: f64 },

    #[error("generalized jacobi index {index} is below 2m = {min}")]
    GjpIndex { index: usize, min: usize },

    #[error("degree N = {degree} is too small for smoothness order m = {m} (need N >= {min})")]
    DegreeTooSmall { degree: usize, m: usize, min: usize },

    #[error("nodal basis construction failed: endpoint residual {0:e}")]
    NodalBasis(f64),

    #[error("degenerate interval [{0}, {1}]")]
    DegenerateInterval(f64, f64),

    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("boxes {first} and {second} do not meet in a full shared face")]
    NonConforming { first: usize, second: usize },

    #[error("interpolation mismatch on shared dof {dof}: {first} vs {second}")]
    SharedDofMismatch { dof: usize, first: f64, second: f64 },

    #[error("coefficient: {0}")]
    Coefficient(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shift {0} makes A - sigma B singular; perturb the shift")]
    SingularShift(String),

    #[error("eigensolver: {0}")]
    Solver(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl SemError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            SemError::Domain(_) | SemError::NonConforming { .. } => ErrorCategory::Mesh,
            SemError::Coefficient(_) | SemError::SharedDofMismatch { .. } | SemError::DimensionMismatch { .. } => {
                ErrorCategory::Assembly
            }
            SemError::SingularShift(_) | SemError::Solver(_) => ErrorCategory::Solver,
            _ => ErrorCategory::Input,
        }
    }
}

pub type Result<T> = std::result::Result<T, SemError>;
