use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use trustlens_core::checkers::CheckerError;
use trustlens_core::connector::ConnectorError;
use trustlens_core::corpus::CorpusError;
use trustlens_core::rating::RatingError;
use trustlens_core::sensitivity::SensitivityError;
use trustlens_core::voting::VotingError;

/// Error classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse(String),
    Config(String),
    Transport(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Config(_) => 3,
            CliError::Transport(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (class, msg) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Parse(m) => ("parse", m),
            CliError::Config(m) => ("config", m),
            CliError::Transport(m) => ("transport", m),
        };
        write!(f, "{class} error: {msg}")
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<CheckerError> for CliError {
    fn from(e: CheckerError) -> Self {
        match e {
            CheckerError::Config(_) => CliError::Config(e.to_string()),
            CheckerError::UndefinedScore(_) => CliError::Parse(e.to_string()),
        }
    }
}

impl From<RatingError> for CliError {
    fn from(e: RatingError) -> Self {
        match e {
            RatingError::Checker(c) => c.into(),
            other => CliError::Parse(other.to_string()),
        }
    }
}

impl From<VotingError> for CliError {
    fn from(e: VotingError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<SensitivityError> for CliError {
    fn from(e: SensitivityError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<ConnectorError> for CliError {
    fn from(e: ConnectorError) -> Self {
        match e {
            ConnectorError::Config(_) | ConnectorError::Io(_) => CliError::Config(e.to_string()),
            ConnectorError::SessionAborted(..) | ConnectorError::Transport(_) => {
                CliError::Transport(e.to_string())
            }
            ConnectorError::Rating(r) => r.into(),
            ConnectorError::Checker(c) => c.into(),
            ConnectorError::NoProbes
            | ConnectorError::Dataset { .. }
            | ConnectorError::Corpus(_) => CliError::Parse(e.to_string()),
        }
    }
}

/// Read a whole file; failures land in the error class chosen by the caller.
pub fn read_to_string(path: &Path, class: fn(String) -> CliError) -> Result<String> {
    fs::read_to_string(path).map_err(|e| class(format!("{}: {e}", path.display())))
}

pub fn write_output(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_config(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_config(path, e))
}

pub fn io_config(path: &Path, e: io::Error) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}
