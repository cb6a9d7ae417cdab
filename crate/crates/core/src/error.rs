use thiserror::Error;

/// Errors produced by the walker pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("jump precondition violated: |phi - 2*theta| = {residual:e} exceeds tolerance {tol:e}")]
    GuardViolated { residual: f64, tol: f64 },

    #[error("no heelstrike before t_max = {t_max} ({n_rejected} grazing crossings rejected)")]
    NoHeelstrike { t_max: f64, n_rejected: usize },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("root bracketing failed: {0}")]
    BracketFailure(String),

    #[error("guard tangency: |F_t| = {ft:e} too close to zero")]
    GuardTangency { ft: f64 },

    #[error("denominator singular in T_delta at (theta, omega) = ({theta}, {omega})")]
    TdeltaSingular { theta: f64, omega: f64 },

    #[error("eigenstructure: {0}")]
    EigenStructure(String),

    #[error("eigenvalue rho = {rho} too close to 1 (degenerate spectrum)")]
    DegenerateRho { rho: f64 },

    #[error("Newton iteration for delta < {min:e} refused: the delta = 0 map has a fixed-point family, I - P' is singular; evaluate the family instead")]
    FamilyDegenerate { min: f64 },

    #[error("Newton did not converge after {iters} iterations (residual {residual:e})")]
    NewtonMaxIter { iters: usize, residual: f64 },

    #[error("singular Newton matrix (|det| = {det:e})")]
    SingularJacobian { det: f64 },

    #[error("no sign change of the necessary condition on ({lo}, {hi})")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Name of the outermost stage, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    /// True for input-validation failures (as opposed to numerical ones).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::NonFinite(_) | Error::InvalidInput(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
