use std::path::PathBuf;

use thiserror::Error;

/// Which electrode an error or quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Electrode {
    Positive,
    Negative,
}

impl std::fmt::Display for Electrode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Electrode::Positive => f.write_str("positive"),
            Electrode::Negative => f.write_str("negative"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {name} = {value} ({reason})")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("{electrode} surface concentration {concentration} mol/m^3 left (0, {max}) at t = {time} s")]
    Saturation {
        electrode: Electrode,
        concentration: f64,
        max: f64,
        time: f64,
    },
    #[error("simulation failed at sample {index}: {source}")]
    AtSample {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid drive cycle: {0}")]
    Cycle(String),
    #[error("traces misaligned at index {index}: {reason}")]
    Alignment { index: usize, reason: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("signal `{signal}` has zero variance; cannot normalize")]
    Normalization { signal: &'static str },
    #[error("descriptor {id} produced a non-finite value at row {row}")]
    Evaluation { id: usize, row: usize },
    #[error("free-running error estimate diverged (|e| = {value}) at step {step}")]
    Divergence { step: usize, value: f64 },
    #[error("invalid regression problem: {0}")]
    Problem(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_sample(self, index: usize) -> Error {
        Error::AtSample {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
