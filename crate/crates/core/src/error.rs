use thiserror::Error;

/// Errors surfaced by grid construction, quadrature, the solver and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be 2 or 3, got {0}")]
    BadDimension(usize),

    #[error("resolution must be odd so the thin plane {{x_n = 0}} is a grid plane, got {0}")]
    EvenResolution(usize),

    #[error("resolution must be at least 17, got {0}")]
    ResolutionTooSmall(usize),

    #[error("radius must be positive, got {0}")]
    BadRadius(f64),

    #[error("ball B_{radius}({center:?}) is not contained in the grid box")]
    BallNotContained { center: [f64; 3], radius: f64 },

    #[error("sampling point {0:?} falls outside the grid box")]
    OutOfBox([f64; 3]),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("boundary datum is negative on the thin plane (w >= 0 required)")]
    InfeasibleDatum,

    #[error("{0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported profile kind: {0}")]
    UnsupportedProfile(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
