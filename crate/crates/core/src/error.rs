use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left}x{left} vs {right}x{right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian (max |H - H^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("unsupported dimension {dim}: {reason}")]
    UnsupportedDimension { dim: usize, reason: &'static str },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Hamiltonian is degenerate (smallest eigenvalue gap {gap:e} <= {tol:e})")]
    Degenerate { gap: f64, tol: f64 },

    #[error("stability guard violated: dt*lambda*|G|*|H0| = {product:e} exceeds {limit}")]
    StabilityGuard { product: f64, limit: f64 },

    #[error("time step guard violated: dt = {dt:e} exceeds 0.01/max(omega, D) = {limit:e}")]
    StepGuard { dt: f64, limit: f64 },

    #[error("energy tr(HG) increased by {increase:e} at step {step} (tolerance 1e-12)")]
    MonotonicityViolated { step: usize, increase: f64 },

    #[error("theta = {theta} is at a pole; use the z-coordinate scheme or reflect first")]
    AtPole { theta: f64 },

    #[error("CFL guard violated: dt_pde = {dt:e} exceeds 0.4*dtheta^2/(2D) = {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("no stationarity after {steps} steps (last residual {last:e}, tol {tol:e})")]
    NotConverged {
        steps: usize,
        last: f64,
        tol: f64,
        residual_history: Vec<(usize, f64)>,
    },

    #[error("quadrature error estimate {relative:e} exceeds 1%; increase the node count")]
    QuadratureNotConverged { relative: f64 },

    #[error("closed forms need a traceless reference Hamiltonian (v = {v})")]
    TracefulReference { v: f64 },

    #[error("invalid matrix literal: {0}")]
    Literal(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
}

impl Error {
    /// True for failures raised by a numerical guard rather than by bad input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::StabilityGuard { .. }
                | Error::StepGuard { .. }
                | Error::MonotonicityViolated { .. }
                | Error::AtPole { .. }
                | Error::Cfl { .. }
                | Error::NotConverged { .. }
                | Error::QuadratureNotConverged { .. }
                | Error::Degenerate { .. }
        )
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
