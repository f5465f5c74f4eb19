use thiserror::Error;

/// Errors raised by the simulation, estimation and training routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("zadoff-chu root {root} is not coprime with length {len}")]
    NonCoprimeRoot { root: u64, len: usize },

    #[error("odd-length vector ({0}) where pairs are required")]
    OddLength(usize),

    #[error("zero pilot entry at subcarrier {0}")]
    ZeroPilot(usize),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("stale forward cache: network changed since the forward pass")]
    StaleCache,

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("CE-Net must finish training before the FUS-Net dataset can be built")]
    UntrainedCeNet,

    #[error("zero reference channel: NMSE undefined")]
    ZeroChannel,

    #[error("{0}")]
    Rejected(String),

    #[error("checkpoint parse error at line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
