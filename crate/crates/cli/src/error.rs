use fsde_core::FsdeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or inconsistent configuration; exit code 2.
    #[error("config error: {0}")]
    Config(String),
    #[error("model error: {0}")]
    Model(#[from] FsdeError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Model(FsdeError::MissingCertificate(_))
            | Self::Model(FsdeError::GridMisaligned { .. })
            | Self::Model(FsdeError::SingularSigma(_))
            | Self::Model(FsdeError::DimensionMismatch { .. })
            | Self::Model(FsdeError::AtomOutsideSupport { .. })
            | Self::Model(FsdeError::DelayMismatch { .. }) => 2,
            Self::Model(_) => 1,
            Self::Io(_) => 2,
        }
    }
}
