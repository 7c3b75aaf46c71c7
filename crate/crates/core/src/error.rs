use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("support_exceeded: radius {radius} exceeds configured cap {cap}")]
    SupportExceeded { radius: i64, cap: i64 },

    #[error("dimension mismatch: expected d = {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty site basis")]
    EmptyBasis,

    #[error("outside_perturbative_regime: {0}")]
    OutsidePerturbativeRegime(String),

    #[error("certificate_failed at scale j = {j} (N = {n}): l2 norm {l2_norm:e} vs bound {l2_bound:e}, off-diagonal ok = {offdiag_ok}")]
    CertificateFailed {
        j: u32,
        n: i64,
        l2_norm: f64,
        l2_bound: f64,
        offdiag_ok: bool,
    },

    #[error("residual_increase at scale j = {j}: {before:e} -> {after:e}")]
    ResidualIncrease { j: u32, before: f64, after: f64 },

    #[error("frequency_collapse: lambda^2 = {0:e} is negative")]
    FrequencyCollapse(f64),

    #[error("excluded_parameter: p0 = {p0}: {reason}")]
    ExcludedParameter { p0: f64, reason: String },

    #[error("no_outer_convergence after {iterations} iterations (last change {last_change:e})")]
    NoOuterConvergence { iterations: usize, last_change: f64 },

    #[error("instance_generation_failed after {attempts} attempts: {reason}")]
    InstanceGenerationFailed { attempts: usize, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
