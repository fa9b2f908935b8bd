use gvm_core::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const INFEASIBLE: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Output(_) => exit::FAILURE,
            CliError::Core(e) => match e {
                Error::InvalidControl(_)
                | Error::TooFewReplicas { .. }
                | Error::TaskMismatch { .. }
                | Error::UseDiagonal(_)
                | Error::UnboundedCurvature => exit::CONFIG,
                Error::Infeasible(_) => exit::INFEASIBLE,
                Error::DimMismatch(_)
                | Error::InvalidDataset(_)
                | Error::BadMagic { .. }
                | Error::Truncated { .. }
                | Error::CountMismatch { .. }
                | Error::BadShape { .. }
                | Error::MalformedRow { .. }
                | Error::VersionMismatch { .. }
                | Error::CorruptModel(_)
                | Error::Io { .. }
                | Error::Csv(_) => exit::DATA,
            },
        }
    }
}

pub(crate) fn output_err(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("cannot write {}: {e}", path.display()))
}
