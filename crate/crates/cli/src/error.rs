use std::fmt;
use std::process::ExitCode;

use proxitrace_core::classifier::table2::Table2Error;
use proxitrace_core::classifier::ClassifierError;
use proxitrace_core::dataset::DatasetError;
use proxitrace_core::sim::SimError;

/// Stable exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Failure = 1,
    Schema = 2,
    DataQuality = 3,
    EmptyStratum = 4,
    Config = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn new(exit: Exit, message: impl Into<String>) -> Self {
        CliError {
            exit,
            message: message.into(),
        }
    }

    pub fn code(&self) -> ExitCode {
        ExitCode::from(self.exit as u8)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(Exit::Failure, e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        let exit = match e {
            DatasetError::MissingColumn(_) | DatasetError::InvalidSchema(_) => Exit::Schema,
            DatasetError::ExcessiveMalformed { .. } => Exit::DataQuality,
            DatasetError::EmptyStratum(_) => Exit::EmptyStratum,
            DatasetError::InvalidFraction(_) | DatasetError::InvalidWindow => Exit::Config,
            DatasetError::MixedStrata(_) | DatasetError::Io(_) => Exit::Failure,
        };
        CliError::new(exit, e.to_string())
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        let exit = match e {
            ClassifierError::InvalidParams(_) | ClassifierError::Format(_) => Exit::Config,
            _ => Exit::Failure,
        };
        CliError::new(exit, e.to_string())
    }
}

impl From<Table2Error> for CliError {
    fn from(e: Table2Error) -> Self {
        match e {
            Table2Error::Dataset(d) => d.into(),
            Table2Error::Classifier(c) => c.into(),
            Table2Error::EmptyCombination(_) => CliError::new(Exit::EmptyStratum, e.to_string()),
            Table2Error::Config(_) => CliError::new(Exit::Config, e.to_string()),
            Table2Error::Io(_) => CliError::new(Exit::Failure, e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let exit = match e {
            SimError::ConfigInvalid(_) => Exit::Config,
            SimError::Classifier(_) => Exit::Config,
            _ => Exit::Failure,
        };
        CliError::new(exit, e.to_string())
    }
}
