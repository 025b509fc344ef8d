use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: [usize; 2],
        right: [usize; 2],
    },
    #[error("complex view needs an even last dimension, got {0}")]
    OddDimension(usize),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss([usize; 2]),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("brute-force oracle exceeded {0} walks")]
    OracleOverflow(usize),
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("function is not deterministic: {first} != {second}")]
    NonDeterministic { first: f64, second: f64 },
    #[error("all {total} runs failed; first error: {first}")]
    RunsFailed { total: usize, first: String },
    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::Shape { .. }
            | Error::OddDimension(_)
            | Error::NonFinite(_)
            | Error::NonScalarLoss(_)
            | Error::Divergence { .. }
            | Error::NonDeterministic { .. }
            | Error::RunsFailed { .. }
            | Error::OracleOverflow(_) => ErrorKind::Numeric,
            Error::Parse { .. } | Error::InvalidGraph(_) | Error::Checkpoint(_) | Error::Io(_) | Error::Json(_) => {
                ErrorKind::Data
            }
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
