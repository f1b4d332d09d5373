use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("solver diverged at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },

    #[error("Newton iteration failed at step {step}: scaled residual {residual:e} after {iterations} iterations")]
    NewtonFailure {
        step: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("step size dt = {dt} violates dt * L_mono < 1 (L_mono = {monotone_const})")]
    InvalidStepSize { dt: f64, monotone_const: f64 },

    #[error("degenerate Wronskian at step {step}: {value:e}")]
    DegenerateWronskian { step: usize, value: f64 },

    #[error("unknown model `{name}`; known models: {known}")]
    UnknownModel { name: String, known: String },

    #[error("model `{0}` has no closed form")]
    NoClosedForm(String),

    #[error("singular diffusion at step {step}: condition number {condition:e}")]
    SingularDiffusion { step: usize, condition: f64 },

    #[error("model `{0}` does not supply coefficient gradients")]
    MissingGradients(String),

    #[error("integrand declared non-adapted; only adapted integrands are supported")]
    NonAdapted,
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// True for the per-path numerical failures that estimators may count
    /// instead of aborting on.
    pub fn is_path_failure(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::NewtonFailure { .. }
                | Error::DegenerateWronskian { .. }
                | Error::SingularDiffusion { .. }
        )
    }
}
