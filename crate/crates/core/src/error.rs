use thiserror::Error;

/// Errors raised across the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode set: {0}")]
    InvalidModeSet(String),

    #[error("projection rank beyond truncation: rank {rank}, retained modes {available}")]
    RankBeyondTruncation { rank: usize, available: usize },

    #[error("state is not divergence-free (max |k.u(k)| = {residual:e})")]
    NotDivergenceFree { residual: f64 },

    #[error("state layout mismatch: {0}")]
    Layout(String),

    #[error("all calibration samples were degenerate")]
    DegenerateCalibration,

    #[error("range condition violated: channel {channel} has vanishing amplitude on a controlled mode")]
    RangeConditionViolated { channel: usize },

    #[error("regularization exponent out of range: gamma = {0} (need gamma > 2/3)")]
    ExponentOutOfRange(f64),

    #[error("numerical blow-up at step {step}: norm {norm:e} exceeds guard")]
    BlowUp { step: usize, norm: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("control does not match model: {0}")]
    ControlMismatch(String),

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("power iteration did not converge after {iterations} iterations (last change {change:e})")]
    NonConvergence { iterations: usize, change: f64 },

    #[error("alpha exceeds achievable ball mass within horizon {horizon}")]
    AlphaTooLarge { horizon: usize },

    #[error("Lyapunov premise fails: {0}")]
    LyapunovPremise(String),

    #[error("missing prerequisite: {0}")]
    MissingPrerequisite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown probe `{0}`")]
    UnknownProbe(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case name of the variant, for machine-readable output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModeSet(_) => "invalid_mode_set",
            Error::RankBeyondTruncation { .. } => "rank_beyond_truncation",
            Error::NotDivergenceFree { .. } => "not_divergence_free",
            Error::Layout(_) => "layout",
            Error::DegenerateCalibration => "degenerate_calibration",
            Error::RangeConditionViolated { .. } => "range_condition_violated",
            Error::ExponentOutOfRange(_) => "exponent_out_of_range",
            Error::BlowUp { .. } => "blow_up",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::ControlMismatch(_) => "control_mismatch",
            Error::InvalidChain(_) => "invalid_chain",
            Error::NonConvergence { .. } => "non_convergence",
            Error::AlphaTooLarge { .. } => "alpha_too_large",
            Error::LyapunovPremise(_) => "lyapunov_premise",
            Error::MissingPrerequisite(_) => "missing_prerequisite",
            Error::Config(_) => "config",
            Error::UnknownProbe(_) => "unknown_probe",
            Error::MissingArtifact(_) => "missing_artifact",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
