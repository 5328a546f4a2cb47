use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the numerical pipeline.
///
/// Variants split into usage errors (bad input) and regime errors (the
/// numerics ran but the requested state does not exist or was not reached);
/// see [`Error::is_regime`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("{method} did not converge after {iterations} iterations (best residual {residual:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("gradient flow did not converge: last energy gap {gap:.3e} after {iterations} iterations")]
    FlowStalled { iterations: usize, gap: f64 },

    #[error("gradient flow produced negative density {value:.3e}")]
    NegativeDensity { value: f64 },

    #[error("operator is not symmetric: defect {defect:.3e}")]
    Asymmetric { defect: f64 },

    #[error("right-hand side not orthogonal to the kernel: <rhs,Q0> = {inner:.3e} (relative {relative:.3e})")]
    NotOrthogonal { inner: f64, relative: f64 },

    #[error("operator near-singular: lambda_min = {lambda_min:.3e}")]
    NearSingular { lambda_min: f64 },

    #[error("bracket sign failure at {endpoint} endpoint M = {mass}: K = {k:.3e}")]
    BracketSign {
        endpoint: &'static str,
        mass: f64,
        k: f64,
    },

    #[error("degenerate expansion: denominator {denominator:.3e}")]
    DegenerateExpansion { denominator: f64 },

    #[error("contraction diverged at eps = {eps}: weighted norms {norms:?}")]
    ContractionDiverged { eps: f64, norms: Vec<f64> },

    #[error("non-finite field at t = {time}")]
    NonFinite { time: f64 },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error means the requested regime is numerically out of
    /// reach, as opposed to malformed input.
    pub fn is_regime(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::FlowStalled { .. }
                | Error::NegativeDensity { .. }
                | Error::NotOrthogonal { .. }
                | Error::NearSingular { .. }
                | Error::BracketSign { .. }
                | Error::DegenerateExpansion { .. }
                | Error::ContractionDiverged { .. }
                | Error::NonFinite { .. }
        )
    }
}
