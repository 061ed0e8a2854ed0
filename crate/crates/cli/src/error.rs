use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] simo_isq::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("verification failed")]
    Verification,
    #[error("{0} decoder/grid-point combination(s) skipped under --strict")]
    StrictSkips(usize),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) | CliError::Core(simo_isq::Error::InvalidParameter { .. }) => 2,
            CliError::Core(_) | CliError::Io { .. } => 1,
            CliError::Verification => 3,
            CliError::StrictSkips(_) => 4,
        })
    }
}

pub fn io_error(path: &str) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_string(),
        source,
    }
}
