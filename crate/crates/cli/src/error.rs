use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid `{field}`: {reason}")]
    Field { field: &'static str, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] rtrg_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn field(field: &'static str, reason: String) -> Self {
        CliError::Field { field, reason }
    }

    /// Process exit status: 2 for configuration problems and the Δt guard,
    /// 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Field { .. } | CliError::Config(_) => 2,
            CliError::Core(rtrg_core::Error::DtGuard { .. } | rtrg_core::Error::InvalidParam { .. }) => 2,
            _ => 1,
        }
    }
}
