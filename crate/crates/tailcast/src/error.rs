use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the pipeline. Variants group into the three fatal
/// categories the CLI maps to exit codes: configuration (2), data (3) and
/// numerical (4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("config: unknown symbol {symbol:?} not present in the panel")]
    MissingSymbol { symbol: String },

    #[error("data: {0}")]
    Data(String),

    #[error("data: {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("data: insufficient history: {rows} usable rows, need at least {need}")]
    InsufficientHistory { rows: usize, need: usize },

    #[error("data: fold {fold} task {task}: training window contains a single class")]
    SingleClassTraining { fold: usize, task: String },

    #[error("numerical: {0}")]
    Numerical(String),

    #[error("numerical: eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")]
    EigenNonConvergence { sweeps: usize, off_norm: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::MissingSymbol { .. } => 2,
            Error::Data(_)
            | Error::Io { .. }
            | Error::InsufficientHistory { .. }
            | Error::SingleClassTraining { .. } => 3,
            Error::Numerical(_) | Error::EigenNonConvergence { .. } => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
