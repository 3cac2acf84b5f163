use thiserror::Error;

/// Exit code for usage and input errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for non-finite numerics during training.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] latent_audio::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(latent_audio::Error::NonFinite { .. }) => EXIT_NUMERIC,
            _ => EXIT_USAGE,
        }
    }
}
