use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncated normal interval [{lo:e}, {hi:e}] (mean {mean:e}, sd {sd:e}) has probability below double precision")]
    IntervalUnderflow { mean: f64, sd: f64, lo: f64, hi: f64 },

    #[error("point lies outside the support: {0}")]
    OutsideSupport(String),

    #[error("minimizer of f + g unavailable: {0}")]
    MissingMinimizer(String),

    #[error("acceptance probability {probability} exceeds one in Sample-Y; f is not convex or L is wrong")]
    ConvexityViolated { probability: f64 },

    #[error("density-ratio estimate {theta} exceeds the acceptance cap {cap} at distance {distance} from the minimizer")]
    ThetaBoundViolated { theta: f64, cap: f64, distance: f64 },

    #[error("rejection loop gave up after {trials} trials")]
    RejectionBudget { trials: u64 },

    #[error("series is constant; autocorrelation undefined")]
    DegenerateSeries,

    #[error("quadrature did not converge after {nodes} nodes")]
    QuadratureNonConvergence { nodes: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
