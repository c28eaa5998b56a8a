use thiserror::Error;

/// Errors produced by mesh construction, scheme steps and field solves.
#[derive(Debug, Error)]
pub enum SldgError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("unsupported polynomial degree k={0} (supported: 1..=3)")]
    UnsupportedDegree(usize),

    #[error("invalid quadrature order {0}")]
    InvalidQuadrature(usize),

    /// Traced feet folded over each other; the step cannot proceed.
    #[error("characteristic crossing in cell {cell}: {detail}")]
    CharacteristicCrossing { cell: usize, detail: String },

    /// Interpolation or least-squares constraint points too close to resolve.
    #[error("ill-conditioned reconstruction in cell {cell}: {detail}")]
    IllConditioned { cell: usize, detail: String },

    /// Upstream-cell clipping failed to produce a consistent decomposition.
    #[error("upstream geometry failure in cell {cell}: {detail}")]
    Geometry { cell: usize, detail: String },

    /// Periodic Poisson problems require a zero-mean source.
    #[error("incompatible Poisson source: mean = {mean:.3e}")]
    IncompatibleSource { mean: f64 },

    #[error("linear solver failure: {0}")]
    Solver(String),

    /// A DG-snapshot velocity field was queried outside its time span.
    #[error("field query at t={t} outside snapshot span [{t_lo}, {t_hi}]")]
    FieldTimeSpan { t: f64, t_lo: f64, t_hi: f64 },

    /// The positivity limiter requires nonnegative cell averages.
    #[error("negative cell average {avg:.3e} in cell {cell}")]
    NegativeCellAverage { cell: usize, avg: f64 },

    #[error("missing line family for transverse node {0}")]
    MissingLineFamily(usize),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, SldgError>;
