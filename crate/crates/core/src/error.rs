use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("angle out of range: {0}")]
    AngleOutOfRange(String),
    #[error("not an SU(2) element: {0}")]
    NotSu2(String),
    #[error("logarithm undefined at the branch point -I")]
    BranchPoint,
    #[error("index out of range: {0}")]
    Index(String),
    #[error("non-finite value: {0}")]
    Domain(String),
    #[error("no calibration candidate matched (max residual {0:e})")]
    Calibration(f64),
    #[error("quadrature grid: {0}")]
    Grid(String),
    #[error("band limit mismatch: {0}")]
    Band(String),
    #[error("layout mismatch: {0}")]
    Layout(String),
    #[error("operator failed the linearity spot check (deviation {0:e})")]
    Nonlinear(f64),
    #[error("ellipticity failure at node {node:?}, l_x2 = {l_x2}: condition number {cond:e}")]
    Ellipticity { node: Option<usize>, l_x2: u32, cond: f64 },
    #[error("ill-conditioned system (condition number {0:e})")]
    IllConditioned(f64),
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("format: {0}")]
    Format(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
