use thiserror::Error;

/// Errors raised by the numeric kernels, controllers and the simulator.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not Hurwitz (max eigenvalue real part {max_real_part:.6e})")]
    NotHurwitz { max_real_part: f64 },

    #[error("matrix asymmetry {asymmetry:.3e} exceeds tolerance {tolerance:.3e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix must be positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("vectorized Lyapunov solve is numerically singular")]
    SingularSystem,

    #[error(
        "matching condition violated (gain residual {k_residual:.3e}, input residual {l_residual:.3e})"
    )]
    MatchingViolated { k_residual: f64, l_residual: f64 },

    #[error("input channel B*lambda is zero")]
    ZeroInputChannel,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("infeasible constraint: {0}")]
    InfeasibleConstraint(String),

    #[error("barrier violated: e'Pe = {quad_form:.6e} >= M^2 = {barrier_sq:.6e}")]
    BarrierViolated { quad_form: f64, barrier_sq: f64 },

    #[error("stability condition violated (margin {margin:.6e})")]
    StabilityConditionViolated { margin: f64 },

    #[error("non-finite state encountered")]
    NonFiniteState,

    #[error("saturation identity violated (|algebraic - clamped| = {0:.3e})")]
    IdentityViolated(f64),

    #[error("scenario rejected by validation:\n{}", .0.join("\n"))]
    ScenarioInvalid(Vec<String>),

    #[error("at t = {t:.6}: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach the simulation timestamp at which the error occurred.
    pub fn at_time(self, t: f64) -> Error {
        Error::AtTime {
            t,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
