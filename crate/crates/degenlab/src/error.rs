use crate::geom::Vec2;

/// Errors raised by the numerical routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite field value at ({}, {})", .0.x, .0.y)]
    NonFinite(Vec2),
    #[error("point ({}, {}) outside the admissible region", .0.x, .0.y)]
    OutOfRegion(Vec2),
    #[error("monotonicity violated for pair ({}, {}) / ({}, {}): inner product {value:e}", .xi.x, .xi.y, .zeta.x, .zeta.y)]
    NotMonotone { xi: Vec2, zeta: Vec2, value: f64 },
    #[error("inversion did not converge for target ({}, {}): residual {residual:e}", .target.x, .target.y)]
    InversionFailed { target: Vec2, residual: f64 },
    #[error("covering failure at node ({}, {})", .0.x, .0.y)]
    NotCovered(Vec2),
    #[error("linear solver failure: {0}")]
    LinearSolve(String),
    #[error("{0}")]
    Precondition(String),
    #[error("no elliptic node in the selected component")]
    NoEllipticNode,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
