use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("state not representable on this grid: {0}")]
    Resolution(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("wave function is not normalized (norm = {norm})")]
    Unnormalized { norm: f64 },

    #[error("every grid point is masked")]
    AllMasked,

    #[error("invalid evolution parameters: {0}")]
    InvalidEvolution(String),

    #[error("numerical abort at step {step} (t = {time}): non-finite wave function")]
    NumericalAbort { step: usize, time: f64 },

    #[error("need at least {needed} snapshots, got {got}")]
    TooFewSnapshots { needed: usize, got: usize },

    #[error("recording interval is not uniform")]
    NonUniformRecording,

    #[error("need at least {needed} seeds, got {got}")]
    TooFewSeeds { needed: usize, got: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 3 for numerical failures, 2 for everything a
    /// corrected configuration would avoid.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalAbort { .. }
            | Error::NonFinite(_)
            | Error::AllMasked
            | Error::Unnormalized { .. } => 3,
            _ => 2,
        }
    }
}
