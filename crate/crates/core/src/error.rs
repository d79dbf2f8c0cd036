use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("point ({x}, {y}) lies outside the {size} km region")]
    OutOfRegion { x: f64, y: f64, size: f64 },

    #[error("speed must be positive, got {0}")]
    NonPositiveSpeed(f64),

    #[error("unknown station {0}")]
    UnknownStation(usize),

    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),

    #[error("probabilities are degenerate: {0}")]
    DegenerateProbabilities(String),

    #[error("no alternatives available")]
    EmptyChoiceSet,

    #[error("log-likelihood is not finite at the initial parameters")]
    NonFiniteLikelihood,

    #[error("parameter layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("empty assortment")]
    EmptyAssortment,

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("cost coefficient must be negative for unconstrained pricing, got {0}")]
    UnboundedPricing(f64),

    #[error("infeasible tour: {0}")]
    InfeasibleTour(String),

    #[error("time regression: fleet is at {now}, asked to advance to {to}")]
    TimeRegression { now: f64, to: f64 },
}
