use thiserror::Error;

/// Errors raised across the tensor algebra, structure construction,
/// sampling, and flow integration layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Scalar nonlinearity evaluated outside its domain (reciprocal of
    /// zero, sqrt/log of a non-positive value).
    #[error("domain error: {0}")]
    Domain(&'static str),

    /// Slot out of range or covariant/contravariant mismatch.
    #[error("slot error: {0}")]
    Slot(String),

    /// Tensor rank outside what the operation supports.
    #[error("rank error: {0}")]
    Rank(String),

    /// Hitchin invariant lambda is too close to zero for a stable
    /// almost-complex structure.
    #[error("degenerate 3-form: lambda = {lambda:.6e} (threshold {threshold:.6e})")]
    DegenerateForm { lambda: f64, threshold: f64 },

    /// Neither sign of the Hitchin normalization yields a positive
    /// definite metric.
    #[error("3-form is not positive: no sign choice gives a positive definite metric")]
    NotPositive,

    /// The 3-form fails the primitivity check against omega.
    #[error("3-form is not primitive: |lambda contraction| residual {residual:.3e}")]
    NotPrimitive { residual: f64 },

    /// Metric is singular or indefinite where positive definiteness is
    /// required.
    #[error("singular metric")]
    SingularMetric,

    /// Rejection sampling gave up.
    #[error("sampling exhausted after {attempts} attempts")]
    SamplingExhausted { attempts: usize },

    /// The Lie algebra admits no symplectic form (every closed 2-form is
    /// degenerate).
    #[error("no solution: the algebra admits no symplectic form")]
    NoSolution,

    /// Structure constants fail the Jacobi identity or nilpotency check.
    #[error("invalid Lie algebra: {0}")]
    InvalidAlgebra(String),

    /// Flow state violates its invariants.
    #[error("invalid flow state: {0}")]
    InvalidState(String),

    /// The flow left the positive cone; `t` is the last valid time.
    #[error("positivity lost during flow at t = {t:.6e}")]
    PositivityLost { t: f64 },

    /// A flow step exceeded the monitor tolerance.
    #[error("step {step} rejected: monitor residual {residual:.3e}")]
    StepRejected { step: usize, residual: f64 },

    /// An identity check was evaluated on a sample kind it does not
    /// apply to.
    #[error("applicability error: check {check} does not run on {sample} samples")]
    Applicability { check: String, sample: String },

    /// Malformed configuration or input file.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
