use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point lives in chart {got}, expected chart {expected}")]
    ChartMismatch { expected: usize, got: usize },
    #[error("trajectory left the chart domain (|q| = {norm:.3e})")]
    ChartExit { norm: f64 },
    #[error("integration step underflow at s = {at:.6}")]
    StepUnderflow { at: f64 },
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular Jacobian")]
    SingularJacobian,
    #[error("line is degenerate for the tangency count")]
    DegenerateLine,
    #[error("input must be positive, got {0}")]
    NonPositiveInput(f64),
    #[error("point is a singularity")]
    AtSingularity,
    #[error("vector is not tangent to the leaf (sin angle {0:.3e})")]
    NotTangent(f64),
    #[error("sampler left the domain")]
    DomainExit,
    #[error("time {0} is out of range")]
    OutOfRange(f64),
    #[error("degenerate frame: |X| = {0:.3e}")]
    DegenerateFrame(f64),
    #[error("at least {needed} paths required, got {got}")]
    InsufficientPaths { needed: usize, got: usize },
    #[error("finite-difference stencil left the flow box")]
    StencilExit,
    #[error("cocycle hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("Lyapunov norm series did not converge")]
    Divergence,
    #[error("solution left the admissible radius (|xi| = {0:.3e})")]
    OutOfRadius(f64),
    #[error("smallness condition violated at step {step}")]
    SmallnessViolated { step: usize },
    #[error("transported point left the transverse section at step {step}")]
    SectionExit { step: usize },
    #[error("histograms use different binnings")]
    BinningMismatch,
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
