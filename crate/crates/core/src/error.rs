use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state '{name}' has non-positive or non-finite population {population}")]
    InvalidPopulation { name: String, population: f64 },

    #[error("duplicate state name '{0}'")]
    DuplicateName(String),

    #[error("state set is empty")]
    EmptyStateSet,

    #[error("divisor must be positive and finite, got {0}")]
    InvalidDivisor(f64),

    #[error("invalid divisor range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("Hamilton's method needs a target house size, not a fixed divisor")]
    HamiltonNeedsHouseSize,

    #[error("target of {target} seats is infeasible: {reason}")]
    InfeasibleTarget { target: u64, reason: String },

    /// No divisor yields the requested total; the nearest totals seen on
    /// either side are reported.
    #[error("no divisor gives exactly {target} seats (nearest below: {below:?}, nearest above: {above:?})")]
    NoExactSolution {
        target: u64,
        below: Option<u64>,
        above: Option<u64>,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("mark {mark} lies outside the family interval [{family}, {family} + 1]")]
    MarkOutOfRange { family: u64, mark: f64 },

    #[error("cumulative mass diverges on the family-{0} interval")]
    DivergentMass(u64),

    #[error("need at least {needed} states, got {got}")]
    TooFewStates { needed: usize, got: usize },

    #[error("log-populations have zero spread")]
    DegenerateSample,

    #[error("bin width must be positive and finite, got {0}")]
    InvalidBinWidth(f64),

    #[error("population {population} of '{name}' lies outside support [{lo}, {hi}]")]
    OutsideSupport {
        name: String,
        population: f64,
        lo: f64,
        hi: f64,
    },

    #[error("{0}")]
    InvalidArgument(String),
}
