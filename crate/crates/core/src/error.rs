use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("model has no atoms")]
    EmptyModel,
    #[error("atom {atom} has dimension {found}, expected {expected}")]
    AtomDimension {
        atom: usize,
        found: usize,
        expected: usize,
    },
    #[error("atom {atom}: probability {p} must be positive and finite")]
    InvalidProbability { atom: usize, p: f64 },
    #[error("atom probabilities sum to {sum}, expected 1")]
    ProbabilitySum { sum: f64 },
    #[error("atom {atom}, component {component}: outcome {value} is below total loss (-1)")]
    OutcomeBelowTotalLoss {
        atom: usize,
        component: usize,
        value: f64,
    },
    #[error("atom {atom}, component {component}: outcome is not finite")]
    NonFiniteOutcome { atom: usize, component: usize },
    #[error("allocation has {found} components, model has {expected}")]
    AllocationDimension { found: usize, expected: usize },
    #[error("allocation {0:?} is not feasible")]
    Infeasible(Vec<f64>),
    #[error("allocation {0:?} is not strictly inside the survival region")]
    OnSurvivalBoundary(Vec<f64>),
    #[error("{0} matrix is singular (degenerate gamble)")]
    SingularMatrix(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("exact enumeration needs {required} sequences, budget is {budget}")]
    BudgetExceeded { required: u64, budget: u64 },
    #[error("no allocation satisfies the drawdown constraint")]
    EmptyFeasibleSet,
    #[error("model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
