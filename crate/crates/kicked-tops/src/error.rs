use thiserror::Error;

/// Crate-wide error type.
///
/// Configuration and input mistakes (bad quantum numbers, malformed grids,
/// out-of-range windows) are distinguished from numerical failures
/// (eigensolver residuals, degenerate distributions) so the command-line
/// front end can map them to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid quantum numbers: {0}")]
    InvalidQuantumNumbers(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("not on the F_z = 0 section: {0}")]
    OffSection(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid averaging window: {0}")]
    InvalidWindow(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("eigensolver failure: {0}")]
    EigenSolve(String),

    #[error("Husimi distribution vanishes on the whole grid")]
    ZeroHusimi,

    #[error("no eigenstate is labeled chaotic; the subspace is empty")]
    EmptyChaoticSubspace,

    #[error("configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by user-supplied configuration rather than by
    /// the numerics; the CLI exits 2 for these and 3 otherwise.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidQuantumNumbers(_)
                | Error::DimensionMismatch(_)
                | Error::OffSection(_)
                | Error::InvalidGrid(_)
                | Error::InvalidWindow(_)
                | Error::InvalidParameter(_)
                | Error::InvalidEnsemble(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
