use thiserror::Error;

use crate::location::Location;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("malformed location {0:?}: expected `file:line`")]
pub struct ParseLocationError(pub String);

/// Failure to turn a benchmark document into a validated program.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },
}

impl LoadError {
    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        LoadError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        LoadError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn path(&self) -> &str {
        match self {
            LoadError::Parse { path, .. } | LoadError::Validation { path, .. } => path,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("witness input does not crash the program")]
    WitnessDoesNotCrash,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("location {0} is not a statement of any function in the slice")]
    TargetOutsideSlice(Location),
    #[error("location {0} is not a statement of the program")]
    UnknownLocation(Location),
}

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("llm transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("oracle predictor requires a witness input")]
    MissingWitness,
    #[error("predictor configuration invalid: {0}")]
    Config(String),
    #[error("prediction invalid: {reason}")]
    Invalid { reason: String, raw: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("campaign configuration invalid: {0}")]
    Config(String),
    #[error("stack prediction failed: {0}")]
    Predictor(#[from] PredictError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("benchmark {path}: {source}")]
    Load {
        path: String,
        #[source]
        source: LoadError,
    },
    #[error("malformed suite or results file {path}: {message}")]
    Format { path: String, message: String },
    #[error("config `{0}` not present in results")]
    MissingConfig(String),
    #[error("unknown config label `{0}`")]
    BadConfig(String),
}
