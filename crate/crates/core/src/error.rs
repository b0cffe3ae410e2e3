use thiserror::Error;

/// Errors raised by model loading, simulation and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rule `{field}` is not evaluable at a = {a}, x = {x} (got {value})")]
    Evaluation {
        field: String,
        a: f64,
        x: f64,
        value: f64,
    },

    #[error("model file field `{field}`: {message}")]
    ModelFile { field: String, message: String },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("fixed-point closure did not converge at step {step} (last residual {residual:e})")]
    NonConvergence { step: usize, residual: f64 },

    #[error("negative {quantity} = {value:e} at step {step}")]
    Negative {
        quantity: &'static str,
        value: f64,
        step: usize,
    },

    #[error("no real root: {0}")]
    NoRoot(String),

    #[error("bracket expansion exceeded cap {cap}")]
    BracketExceeded { cap: f64 },

    #[error("degenerate weight `{name}`: integral against survival is zero")]
    DegenerateWeight { name: &'static str },

    #[error("derivative of `{0}` with respect to density is unavailable and central differencing is disabled")]
    MissingDerivative(&'static str),

    #[error("envelope `{name}` violated at a = {a}, x = {x}")]
    EnvelopeViolated { name: &'static str, a: f64, x: f64 },

    #[error("operation requires {0}, which the model does not supply")]
    Missing(&'static str),

    #[error("{x} has no preimage under psi (psi(0) = {psi0})")]
    NoPreimage { x: f64, psi0: f64 },

    #[error("no sub-reproduction region near the origin: R({eps}, {eps}) = {r}")]
    NoSubReproductionRegion { eps: f64, r: f64 },

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("model failed validation: {0}")]
    Validation(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::ModelFile { .. } | Error::Evaluation { .. } => 2,
            Error::Inconclusive(_) => 4,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Scenario(_) => 1,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
