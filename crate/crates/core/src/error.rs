use thiserror::Error;

/// Errors raised across the simulation, environment and training stack.
#[derive(Debug, Error)]
pub enum RbcError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("solver diverged at step {step} (t = {time:.4}): non-finite field values")]
    Diverged { step: u64, time: f64 },

    #[error("checkpoint generation for seed {seed} failed: {source}")]
    CheckpointFailed {
        seed: u64,
        #[source]
        source: Box<RbcError>,
    },

    #[error("training aborted: initial state {initial_state} diverged repeatedly")]
    TrainingDiverged { initial_state: String },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("non-finite loss during update: {0}")]
    NonFiniteLoss(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl RbcError {
    /// Short category name, used by the CLI for exit codes and messages.
    pub fn category(&self) -> &'static str {
        match self {
            RbcError::Config(_) => "config",
            RbcError::Diverged { .. } | RbcError::CheckpointFailed { .. }
            | RbcError::TrainingDiverged { .. } => "divergence",
            RbcError::Domain(_) | RbcError::DivisionByZero(_) | RbcError::Input(_) => "input",
            RbcError::NonFiniteLoss(_) => "training",
            RbcError::Format(_) | RbcError::Io(_) | RbcError::Csv(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, RbcError>;
