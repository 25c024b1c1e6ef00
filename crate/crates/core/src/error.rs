use thiserror::Error;

use crate::expansion::CompatReport;
use crate::expr::ExprError;
use crate::profiles::SolvabilityReport;
use crate::reduced_solver::CornerCompatReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value {value} at ({x}, {y})")]
    NonFinite { x: f64, y: f64, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("entry ({row}, {col}) is outside a {nrows}x{ncols} matrix")]
    IndexOutOfRange { row: usize, col: usize, nrows: usize, ncols: usize },

    #[error("matrix is numerically singular: pivot {pivot:e} in column {column}")]
    Singular { column: usize, pivot: f64 },

    #[error("linear solve residual {residual:e} exceeds bound {bound:e}")]
    InaccurateSolve { residual: f64, bound: f64 },

    #[error("an order-{order} one-sided trace needs {needed} nodes along the normal, grid has {available}")]
    TooFewNodes { order: usize, needed: usize, available: usize },

    #[error("boundary data violate corner compatibility (max residual {:e})", .0.max_residual())]
    CornerCompatibility(Box<CornerCompatReport>),

    #[error("compatibility conditions fail; the expansion with corner compatibility is refused")]
    CompatibilityRefused(Box<CompatReport>),

    #[error("polynomial degree {needed} exceeds the allowed maximum {max}")]
    DegreeExhausted { needed: usize, max: usize },

    #[error("corner profile has no polynomial solution: {}", .0.summary())]
    Unsolvable(Box<SolvabilityReport>),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
