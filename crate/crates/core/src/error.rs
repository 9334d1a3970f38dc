use std::io;

use thiserror::Error;

use crate::topology::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("random graph generation failed: still disconnected after {attempts} attempts")]
    GenerationFailed { attempts: u32 },

    #[error("node {to} is unreachable from node {from}")]
    Unreachable { from: NodeId, to: NodeId },

    #[error("no consumer set satisfied the distance window after {draws} draws")]
    SamplingExhausted { draws: u64 },

    /// An engine handed an inconsistent request to a lower layer. Always a bug.
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("sweep value {sweep_param}={sweep_value}: {source}")]
    Sweep {
        sweep_param: String,
        sweep_value: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
