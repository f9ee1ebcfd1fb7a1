use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CanardError {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonFailed { iterations: usize, residual: f64 },

    #[error("degenerate fold: the Jacobian of (F, F_x) is singular at the root; need F_xx != 0 and F_y != 0")]
    DegenerateFold,

    #[error("canard point is not certified: {0}")]
    Uncertified(String),

    #[error("vanishing required-nonzero derivative {name} = {value:e}")]
    DegenerateCoefficient { name: &'static str, value: f64 },

    #[error("graph solve y_S(x) failed at x = {x}")]
    GraphSolve { x: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("wrong regime: expected {expected}")]
    WrongRegime { expected: &'static str },

    #[error("zero forcing frequency")]
    ZeroFrequency,

    #[error("step size underflow at t = {t} (h = {h:e}); last state {state:?}")]
    StepUnderflow { t: f64, h: f64, state: Vec<f64> },

    #[error("non-finite right-hand side at t = {t}")]
    NonFinite { t: f64 },

    #[error("{invalid} of {total} shooting samples invalid")]
    TooManyInvalid { invalid: usize, total: usize },

    #[error("fold search did not converge in {iterations} iterations; bracket [{lo}, {hi}]")]
    FoldSearch { iterations: usize, lo: f64, hi: f64 },

    #[error("boundary has {gaps} gaps out of {total} points")]
    TooManyGaps { gaps: usize, total: usize },
}

impl CanardError {
    /// True for input-validation failures, false for numerical ones.
    pub fn is_validation(&self) -> bool {
        matches!(self, CanardError::Validation(_) | CanardError::WrongRegime { .. } | CanardError::ZeroFrequency)
    }
}

pub type Result<T> = std::result::Result<T, CanardError>;
