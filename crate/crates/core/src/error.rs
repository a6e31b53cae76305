use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum IcfError {
    /// Bad parameters, malformed spec strings, out-of-range grid sizes.
    #[error("configuration error: {0}")]
    Config(String),

    /// A point or argument outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The support state violates its ambient invariant (e.g. leaves the unit ball).
    #[error("state invalid at node ({i}, {j}), t = {t}: {reason}")]
    StateInvalid {
        i: usize,
        j: usize,
        t: f64,
        reason: String,
    },

    /// The radii matrix stopped being positive definite.
    #[error("convexity lost at node ({i}, {j}), t = {t}: min radius {min_radius:e}")]
    ConvexityLost {
        i: usize,
        j: usize,
        t: f64,
        min_radius: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, IcfError>;
