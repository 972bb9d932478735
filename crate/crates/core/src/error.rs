use thiserror::Error;

/// Errors raised by the numerical kernels.
///
/// Most variants signal that a computation ran past what the current
/// resolution or the bunching regime supports, rather than a programming
/// error: callers are expected to report them, not unwrap them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("monotonicity lost: min derivative {min_derivative:.3e} (grid under-resolved?)")]
    MonotonicityLost { min_derivative: f64 },

    #[error("inversion residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ToleranceNotMet { residual: f64, tol: f64 },

    #[error("derivative of order {order} unreliable: tail energy fraction {tail_fraction:.3e}")]
    OrderTooHigh { order: usize, tail_fraction: f64 },

    #[error("bracket out of local range: eigen coordinates ({a:.4}, {b:.4}) exceed r_loc = {r_loc}")]
    OutOfLocalRange { a: f64, b: f64, r_loc: f64 },

    #[error("point is not on the {leaf} leaf: transverse residual {residual:.3e}")]
    NotOnLeaf { leaf: &'static str, residual: f64 },

    #[error("bunching violated: theta = sigma * lambda^beta = {theta:.4} >= 1")]
    BunchingViolated { theta: f64 },

    #[error("holonomy increments do not contract (ratio {theta:.4}) after {steps} steps")]
    NoContraction { theta: f64, steps: usize },

    #[error("su-path is not closed: endpoint is {gap:.3e} away from the start")]
    NotClosed { gap: f64 },

    #[error("path independence violated: residual {residual:.3e} vs error bound {bound:.3e}")]
    PathIndependenceViolated { residual: f64, bound: f64 },

    #[error("cocycle probe shows derivative growth: {detail}")]
    Unbounded { detail: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
