use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("configs do not share input and noise list: {0}")]
    HeterogeneousInputs(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 3 for data problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::HeterogeneousInputs(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl From<mimostream::Error> for CliError {
    fn from(e: mimostream::Error) -> Self {
        use mimostream::Error as E;
        match e {
            E::InvalidConfig(_)
            | E::InvalidParams(_)
            | E::InvalidScene(_)
            | E::InvalidNoise(_)
            | E::NonPositiveSigma(_)
            | E::PolicyUnavailable(_)
            | E::BadStackShape { .. } => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
