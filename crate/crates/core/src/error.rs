use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("lattice basis has |det| = {det}, expected 1")]
    UnitAreaViolation { det: f64 },
    #[error("grid resolution {n} must be even and within 16..=4096")]
    ResolutionError { n: usize },
    #[error("{what} must have zero mean (largest component mean {mean:e})")]
    MeanZeroRequired { what: &'static str, mean: f64 },
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("|x| = {norm} lies outside the chart radius {iota}")]
    ChartDomainError { norm: f64, iota: f64 },
    #[error("bubble scale {lambda} is under-resolved at N = {n} (need lambda <= N/16)")]
    UnderResolvedBubble { lambda: f64, n: usize },
    #[error("cutoff geometry rejected: {0}")]
    GeometryError(String),
    #[error("tangent frame Gram matrix has condition number {cond:e}")]
    DegenerateFrame { cond: f64 },
    #[error("nearest-bubble iteration did not converge in {iterations} steps")]
    ProjectionDiverged { iterations: usize },
    #[error("fitted bubble scale {lambda} dropped below lambda_min = {lambda_min}")]
    LeftBubbleRegime { lambda: f64, lambda_min: f64 },
    #[error("Wente pair is degenerate: phi_ab vanishes")]
    DegeneratePair,
    #[error("eigen-iteration stopped after {iterations} steps with residual {residual:e}")]
    EigsNotConverged { iterations: usize, residual: f64 },
    #[error("decay rates belong to the other regime: {0}")]
    WrongRegime(String),
    #[error("log-log fit needs positive data: {0}")]
    FitDomainError(String),
    #[error("line search stalled at step {step}")]
    FlowStalled { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
