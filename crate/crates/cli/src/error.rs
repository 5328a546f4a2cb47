use gp_pump_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("malformed config: {0}")]
    Config(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for numerical-regime failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_regime() => 2,
            _ => 1,
        }
    }

    /// Short fixed phrase naming the failure class.
    pub fn reason(&self) -> &'static str {
        match self {
            CliError::Config(_) => "malformed config",
            CliError::Usage(_) => "usage error",
            CliError::Io(_) => "io error",
            CliError::Json(_) => "bad json artifact",
            CliError::Core(e) => match e {
                CoreError::ContractionDiverged { .. } => "contraction diverged",
                CoreError::BracketSign { .. } => "bracket sign failure",
                CoreError::NoConvergence { .. } => "no convergence",
                CoreError::FlowStalled { .. } => "gradient flow stalled",
                CoreError::NegativeDensity { .. } => "negative density",
                CoreError::NotOrthogonal { .. } => "solvability condition violated",
                CoreError::NearSingular { .. } => "near-singular operator",
                CoreError::DegenerateExpansion { .. } => "degenerate expansion",
                CoreError::NonFinite { .. } => "non-finite field",
                CoreError::InvalidGrid(_) => "invalid grid",
                CoreError::InvalidArgument(_) => "invalid argument",
                CoreError::GridMismatch { .. } => "grid mismatch",
                CoreError::Format(_) => "bad snapshot",
                CoreError::Asymmetric { .. } => "asymmetric operator",
                CoreError::Io(_) => "io error",
            },
        }
    }
}
