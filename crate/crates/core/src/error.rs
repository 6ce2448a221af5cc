//! Error types shared across the crate.

use thiserror::Error;

/// Errors from dense matrix algebra and eigensolves.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix not Hermitian: asymmetry norm {defect:.3e} exceeds {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal {off:.3e})")]
    NoConvergence { sweeps: usize, off: f64 },
    #[error("block split index {ds} out of range for dimension {dim}")]
    BadBlockSplit { ds: usize, dim: usize },
    #[error("invalid matrix data: {0}")]
    BadData(String),
}

/// Errors from state validation and repair.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("trace {trace:.12} deviates from 1 by more than {tol:.1e}")]
    TraceDeviation { trace: f64, tol: f64 },
    #[error("eigenvalue {eig:.3e} below positivity tolerance -{tol:.1e}")]
    NotPositive { eig: f64, tol: f64 },
    #[error("positivity repair refused: eigenvalue {eig:.3e} below -{tol:.1e}; reduce dt")]
    RepairTooLarge { eig: f64, tol: f64 },
    #[error("jump rate {rate:.3e} at or below threshold; jump impossible")]
    ZeroJumpRate { rate: f64 },
}

/// Errors raised by certificate computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("operator block Q must vanish, found norm {0:.3e}")]
    NonzeroQBlock(f64),
    #[error("matrix is not positive definite: min eigenvalue {0:.3e}")]
    NotPositiveDefinite(f64),
    #[error("delta must lie in (0,1), got {0}")]
    DeltaOutOfRange(f64),
    #[error("D_S* D_S is singular: min eigenvalue {0:.3e}")]
    SingularSBlock(f64),
    #[error("c2 must be positive, got {0}")]
    NonpositiveC2(f64),
    #[error("sampler produced no usable states")]
    DegenerateSampler,
}

/// Errors raised while integrating trajectories.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("non-finite state at t={t:.6}: {what}")]
    NonFiniteState { t: f64, what: String },
    #[error("jump rate {rate:.3e} exceeds configured clock bound {bound:.3e}")]
    RateAboveClockBound { rate: f64, bound: f64 },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("trajectory {index} (seed {seed}) failed: {source}")]
    TrajectoryFailed {
        index: usize,
        seed: u64,
        #[source]
        source: Box<SimulationError>,
    },
}

/// Errors from statistical post-processing.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("no qualifying trajectories: {0}")]
    NoTrajectories(String),
    #[error("segment too short: {have} samples after burn-in, need at least {need}")]
    SegmentTooShort { have: usize, need: usize },
    #[error("all distances on the regression segment are zero")]
    DegenerateSegment,
    #[error("ensemble/oracle mismatch: {0}")]
    ConfigMismatch(String),
}
