use thiserror::Error;

/// Errors produced by the simulation, inference and control layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// A rollout or plant step produced a non-finite state.
    #[error("integration blow-up at step {step}: {detail}")]
    IntegrationBlowup { step: usize, detail: String },

    #[error("score probe rollout failed along parameter dimension {dim}: {source}")]
    ScoreProbe {
        dim: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("planning failed: {0}")]
    PlanningFailure(String),

    #[error("numerical overflow: {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
