use num_complex::Complex64;
use thiserror::Error;

/// Failures reported by every fallible operation of the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid functions live on different grids")]
    GridMismatch,

    #[error("point {0} is not exterior to the disc of radius {1}")]
    NotExterior(Complex64, f64),

    #[error("matrix is not a complex structure: |J^2 + I| = {0:e}")]
    NotAComplexStructure(f64),

    #[error("J_st + J is singular (structure opposite to J_st)")]
    OppositeStructure,

    #[error("complex matrix has spectral norm {0} >= 1")]
    NormTooLarge(f64),

    #[error("coordinate change is singular at {0:?}")]
    SingularChange(Vec<Complex64>),

    #[error("chart normalization failed: seminorm {seminorm:e} at lambda {lambda:e}")]
    NormalizationFailed { lambda: f64, seminorm: f64 },

    #[error("point {point:?} escapes the chart (node {node:?})")]
    ChartEscape {
        node: Option<usize>,
        point: Vec<Complex64>,
    },

    #[error("fixed point iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("intersection search failed at t = {t}: distance {distance:e}")]
    IntersectionFailed { t: f64, distance: f64 },

    #[error("point is not on the boundary: rho = {0:e}")]
    NotOnBoundary(f64),

    #[error("point is not inside the domain: rho = {0:e}")]
    OutsideDomain(f64),

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("submanifold is not generic at sample {0}")]
    NotGeneric(usize),

    #[error("sample cloud spans too few scales: ratio {0}")]
    TooFewScales(f64),

    #[error("approach region shell {0} is empty")]
    EmptyShell(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
