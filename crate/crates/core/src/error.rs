//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),

    #[error("field too small: need at least {need}x{need}, got {nx}x{ny}")]
    FieldTooSmall { need: usize, nx: usize, ny: usize },

    #[error("boundary offset {offset} out of range for {nx}x{ny} grid")]
    OffsetOutOfRange { offset: usize, nx: usize, ny: usize },

    #[error("Dirichlet padding field required but not supplied")]
    MissingDirichletPad,

    #[error("operation requires hx == hy, got hx={hx} hy={hy}")]
    AnisotropicGrid { hx: f64, hy: f64 },

    #[error("kernel calibrated for 64x64 grids only, got {nx}x{ny}")]
    CalibratedKernelGridSize { nx: usize, ny: usize },

    #[error("degenerate least-squares fit: convolution output is identically zero")]
    DegenerateFit,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient history: scheme needs {need} frames, got {got}")]
    InsufficientHistory { need: usize, got: usize },

    #[error("solver failed to converge at step {step}: residual inf-norm {residual:.3e}")]
    SolverDiverged { step: usize, residual: f64 },

    #[error("linear solver stalled: relative residual {residual:.3e}")]
    LinearSolveFailed { residual: f64 },

    #[error("optimization produced a non-finite objective at iteration {iter}")]
    OptimizationFailed { iter: usize },

    #[error("format error at byte {offset}: {what}")]
    Format { offset: u64, what: String },

    #[error("grid dimensions {nx}x{ny} not divisible by factor {factor}")]
    NotDivisible { nx: usize, ny: usize, factor: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
