use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the closed positive orthant")]
    Domain { point: Vec<f64> },

    #[error("evaluation failed: {reason}")]
    Eval { reason: String },

    #[error("domain error: {0}")]
    ExprDomain(String),

    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("missing parameter `{0}`")]
    MissingParam(String),

    #[error("invalid boundary point: {0}")]
    InvalidBoundaryPoint(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("solution exceeded the blow-up cap at r = {r_stop}")]
    Blowup { r_stop: f64 },

    #[error("step limit exhausted at r = {r_stop}")]
    StepLimit { r_stop: f64 },

    #[error("shot did not end with a wall hit")]
    NotAWallHit,

    #[error("target lies too close to the image of the boundary")]
    TargetOnBoundaryImage,

    #[error("grid too coarse to resolve the boundary image: {0}")]
    GridTooCoarse(String),

    #[error("no hit-index switch found across the simplex")]
    NoSwitchFound,

    #[error("budget of {shots} shots exhausted; best value {best_value:e} at {best_alpha:?}")]
    BudgetExhausted {
        best_alpha: Vec<f64>,
        best_value: f64,
        shots: usize,
    },

    #[error("quadrature failed to converge (error estimate {estimate:e})")]
    QuadratureFailure { estimate: f64 },

    #[error("not a Dirichlet solution: {0}")]
    NotADirichletSolution(String),

    #[error("unsupported system: {0}")]
    UnsupportedSystem(String),
}

impl Error {
    pub(crate) fn eval(reason: impl Into<String>) -> Self {
        Error::Eval {
            reason: reason.into(),
        }
    }

    /// Numerical failures (as opposed to bad input) map to a distinct CLI exit status.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Blowup { .. }
                | Error::StepLimit { .. }
                | Error::BudgetExhausted { .. }
                | Error::QuadratureFailure { .. }
                | Error::GridTooCoarse(_)
                | Error::NoSwitchFound
                | Error::Eval { .. }
                | Error::Domain { .. }
        )
    }
}
