use std::io;

use thiserror::Error;

use crate::pipeline::PipelineEvent;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied data whose shape, range or content the operation cannot accept.
    #[error("rejected input: {0}")]
    Input(String),

    /// An object was used in a state that does not allow the operation
    /// (stale cache, non-finite gradients, mismatched optimizer state).
    #[error("rejected state: {0}")]
    State(String),

    /// A model configuration that would produce an empty feature map.
    #[error("model build failed: {0}")]
    Build(String),

    #[error("image format: {0}")]
    Format(String),

    #[error("weights file: {0}")]
    Weights(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    /// The event sink refused an event; the event that could not be delivered is kept.
    #[error("event sink failed at frame {}: {source}", event.frame)]
    Sink {
        event: Box<PipelineEvent>,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }
}
