use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),

    #[error("matrix is not traceless (trace {0:e})")]
    NonTraceless(f64),

    #[error("no embedded Lebedev rule of exactness degree {0}")]
    UnsupportedOrder(usize),

    #[error("integrand is not finite at node {node}")]
    NonFiniteIntegrand { node: usize },

    #[error("Q-tensor is not strictly physical (margin {margin:e})")]
    NotPhysical { margin: f64 },

    #[error("Lagrange multiplier solve did not converge after {iterations} iterations (residual {residual:e})")]
    DualNoConvergence { iterations: usize, residual: f64 },

    #[error("moment covariance is numerically singular (smallest eigenvalue {min_eigenvalue:e})")]
    SingularCovariance { min_eigenvalue: f64 },

    #[error("mesh parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("mesh has no tetrahedra")]
    EmptyMesh,

    #[error("mesh contains element type {element_type}, only tetrahedra (type 4) are supported")]
    NonTetElements { element_type: usize },

    #[error("elastic constants violate ellipticity (margin {margin:e})")]
    EllipticityViolated { margin: f64 },

    #[error("field leaves the physical regime at element {element}, quadrature point {point} (margin {margin:e})")]
    NotPhysicalAtQuadPoint {
        element: usize,
        point: usize,
        margin: f64,
    },

    #[error(
        "Newton iteration did not converge in {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("damped step fell below the minimum step length at iteration {iteration}")]
    StepRejected { iteration: usize },

    #[error("linear solve failed (relative residual {residual:e})")]
    LinearSolveFailed { residual: f64 },

    #[error("{dofs} free dofs exceed the dense linear algebra limit of {limit}")]
    TooLarge { dofs: usize, limit: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for errors caused by a field leaving the physical eigenvalue range.
    pub fn is_physicality(&self) -> bool {
        matches!(
            self,
            Error::NotPhysical { .. } | Error::NotPhysicalAtQuadPoint { .. }
        )
    }
}
