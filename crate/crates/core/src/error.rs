use thiserror::Error;

/// Errors produced by configuration handling, exact computations and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    /// Headways are undefined on the empty lattice (the headway indicator is not).
    #[error("headways are not defined for the empty lattice")]
    HeadwaysUndefined,

    #[error("invalid move: sites {x} and {y} are not nearest neighbors on a torus of {l} sites")]
    InvalidMove { l: usize, x: usize, y: usize },

    /// The interaction potential is infinite at a positive distance, so the
    /// jump-rate ratios are undefined there.
    #[error("interaction potential is infinite at distance {r}; rates are undefined")]
    InfinitePotential { r: usize },

    #[error("potential tables reach distance {depth} but distance {needed} was requested; rebuild the potential with a larger depth")]
    DepthExceeded { needed: usize, depth: usize },

    #[error("degenerate state space for L={l}, N={n}: {reason}")]
    DegenerateSpace { l: usize, n: usize, reason: String },

    #[error("window [{a}, {b}] is too small: {reason}")]
    WindowTooSmall { a: i64, b: i64, reason: String },

    #[error("stationary distribution solve failed: {0}")]
    NonUniqueStationary(String),

    #[error("series diverges: {0}")]
    DivergentSeries(String),

    #[error("series did not reach tolerance {tol:e} within {terms} terms (tail bound {bound:e})")]
    SeriesNotConverged { terms: usize, tol: f64, bound: f64 },

    #[error("inversion target out of range: {0}")]
    RangeError(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
