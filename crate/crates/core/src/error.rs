use thiserror::Error;

/// Failure modes shared by all modules of the workbench.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("spectral gap {gap:e} at base point {point} is below the tolerance {tol:e}")]
    KernelGap { point: usize, gap: f64, tol: f64 },
    #[error("not an orthogonal projection at base point {point} (defect {defect:e})")]
    NotAProjection { point: usize, defect: f64 },
    #[error("difference of sections is not relatively smoothing (tail entry {tail:e} at base point {point})")]
    NotRelativelySmoothing { point: usize, tail: f64 },
    #[error("index methods disagree at base point {point}: trace {trace}, svd {svd}")]
    MethodsDisagree { point: usize, trace: f64, svd: i64 },
    #[error("kernel rank jumps over the base: {0:?}")]
    RankJump(Vec<usize>),
    #[error("expansion fit diverged: residual {residual:e}, condition {condition:e}")]
    FitDivergence { residual: f64, condition: f64 },
    #[error("extrapolation failed: {0}")]
    Extrapolation(String),
    #[error("boundary condition degenerate on mode {mode} (defect {defect:e})")]
    DegenerateBC { mode: i64, defect: f64 },
    #[error("root finder stalled on mode {mode} near {near}")]
    RootFinderStall { mode: i64, near: f64 },
    #[error("eigenvalue cutoff {cutoff} too small for t = {t} (tail bound {bound:e})")]
    Cutoff { cutoff: f64, t: f64, bound: f64 },
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("pole at s = 1")]
    Pole,
    #[error("unsupported input: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
