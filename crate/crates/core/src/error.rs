//! Error type shared by every solver stage.

/// Errors produced by geometry validation, field relaxation, interpolation,
/// crystal minimization, and structure analysis.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Mathieu parameter q = {q:.4} outside the first stability region (|q| < {limit})")]
    UnstableDrive { q: f64, limit: f64 },

    #[error("grid spacing {spacing:.3e} m too coarse: fewer than 4 nodes span the {gap:.3e} m endcap gap")]
    SpacingTooCoarse { spacing: f64, gap: f64 },

    #[error("electrode solids overlap at ({x:.4e}, {y:.4e}, {z:.4e}) m")]
    OverlappingElectrodes { x: f64, y: f64, z: f64 },

    #[error("relaxation stalled: residual {residual:.3e} V after {sweeps} sweeps (tolerance {tolerance:.1e} V)")]
    SolverStalled {
        tolerance: f64,
        sweeps: usize,
        residual: f64,
    },

    #[error("basis for {0} is not available")]
    MissingBasis(String),

    #[error("stationary point search left the free region")]
    MinimumOnBoundary,

    #[error("stationary point is not a minimum (curvature eigenvalues {0:?})")]
    SaddlePoint([f64; 3]),

    #[error("non-positive curvature at the pseudopotential minimum ({0:?})")]
    NegativeCurvature([f64; 3]),

    #[error("point ({x:.4e}, {y:.4e}, {z:.4e}) m outside the interpolation domain")]
    OutOfDomain { x: f64, y: f64, z: f64 },

    #[error("ions {i} and {j} closer than {limit:.1e} m")]
    CoincidentIons { i: usize, j: usize, limit: f64 },

    #[error("no minimization restart converged (best residual force {best_residual:.3e} N)")]
    NoConvergence { best_residual: f64 },

    #[error("crystal state is not converged")]
    NotConverged,

    #[error("structure is not planar: {0}")]
    NotPlanar(String),

    #[error("need at least {need} ions, got {got}")]
    TooFewIons { need: usize, got: usize },

    #[error("potential is not confining (curvature eigenvalues {0:?})")]
    NonConfining([f64; 3]),

    #[error("bisection bracket invalid: {0}")]
    BracketInvalid(String),

    #[error("cache file {path}: {reason}")]
    Cache { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Coarse category used by callers that map errors onto process exit codes.
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            InvalidParameter(_) | UnstableDrive { .. } | SpacingTooCoarse { .. }
            | OverlappingElectrodes { .. } | TooFewIons { .. } => ErrorCategory::Config,
            Cache { .. } | Io(_) => ErrorCategory::CacheIo,
            _ => ErrorCategory::Solver,
        }
    }
}

/// Coarse failure category: configuration, numerical, or storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Solver,
    CacheIo,
}
