//! Error taxonomy shared by every module of the library.
//!
//! All fallible operations return [`Result<T>`](crate::Result). Conditions
//! that are legitimate limiting values (a log-density of a configuration with
//! coincident points, say) are represented in-band as `-inf` rather than as
//! errors; the variants here are genuine failures of a numerical contract.

use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Adaptive quadrature refinement stalled before reaching its relative
    /// tolerance.
    #[error("quadrature did not converge: {0}")]
    NonConvergent(String),

    /// A kernel sum or determinant left the representable range. The value is
    /// signalled, never saturated.
    #[error("overflow: {0}")]
    Overflow(String),

    /// A Palm reduction point has an effectively vanishing kernel diagonal
    /// (below 1e-14 of the kernel scale), i.e. it lies outside the space.
    #[error("degenerate condition at point ({re}, {im}): diagonal {diag:e} below threshold")]
    DegenerateCondition { re: f64, im: f64, diag: f64 },

    /// A quadrature node fell within 1e-9 of a pole of the Nystrom
    /// multiplier.
    #[error("grid node within 1e-9 of a multiplier pole at ({re}, {im})")]
    PoleOnGrid { re: f64, im: f64 },

    /// `1 + A` is numerically singular in a Fredholm determinant.
    #[error("1 + A is numerically singular: {0}")]
    Singular(String),

    /// A moment Gram determinant came out non-positive.
    #[error("singular or non-positive Gram determinant: {0}")]
    SingularGram(String),

    /// kappa requires z != 0.
    #[error("division by zero: kappa evaluated at z = 0")]
    DivisionByZero,

    /// An evaluation point fell within 1e-12 of a pole q_i.
    #[error("evaluation point within 1e-12 of pole at ({re}, {im})")]
    PoleProximity { re: f64, im: f64 },

    /// The conditioning window must contain the origin.
    #[error("window (center ({re}, {im}), radius {radius}) does not contain the origin")]
    OriginNotInWindow { re: f64, im: f64, radius: f64 },

    /// An exterior configuration point lies inside the conditioning window.
    #[error("exterior point ({re}, {im}) lies inside the window")]
    ExteriorPointInsideWindow { re: f64, im: f64 },

    /// The grid cannot represent the requested object (shape preconditions,
    /// or the discretized projection trace drifted from its rank).
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    /// A statistical conditioning class collected fewer than 500 hits.
    #[error("insufficient samples: conditioning class has {hits} hits (< {required})")]
    InsufficientSamples { hits: usize, required: usize },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
