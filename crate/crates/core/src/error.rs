use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point #{index} coordinate {coordinate} = {value} lies outside [{lo}, {hi}]")]
    OutOfDomain {
        index: usize,
        coordinate: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// A pair of observations violates the Lipschitz-with-tolerance constraint.
    #[error("observations #{i} and #{j} are not short: |dG| - d_L - T = {violation:.6e} > 0")]
    InfeasibleData { i: usize, j: usize, violation: f64 },

    #[error("empty envelope at {point:?}: lower {lower} > upper {upper}")]
    EmptyEnvelope {
        point: Vec<f64>,
        lower: f64,
        upper: f64,
    },

    #[error("operation requires a non-empty dataset")]
    EmptyDataset,

    #[error("no feasible Lipschitz constants in the box: observations #{i} and #{j} still violate by {violation:.6e} at the upper corner")]
    NoFeasibleLipschitz { i: usize, j: usize, violation: f64 },

    /// The constraints admit no solution.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("contract violation: {0}")]
    Contract(String),
}
