use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::{ConfigIssue, Membership};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", format_issues(.0))]
    InvalidConfig(Vec<ConfigIssue>),

    #[error("state outside the state space: {0}")]
    OutsideStateSpace(Membership),

    #[error("{function} evaluated outside its domain at {argument}")]
    Domain {
        function: &'static str,
        argument: f64,
    },

    #[error("polar coordinates are undefined at the origin")]
    Origin,

    #[error("steering angle {delta} of vehicle {vehicle} is not in (-pi/2, pi/2)")]
    Steering { vehicle: usize, delta: f64 },

    #[error("{quantity} must be positive on the state space, got {value} for vehicle {vehicle}")]
    NonPositive {
        quantity: &'static str,
        vehicle: usize,
        value: f64,
    },

    #[error("non-finite derivative during integration")]
    NonFinite,

    #[error("finite-difference step {step} does not resolve dH/dt: {coarse} vs {fine}")]
    Unresolved { step: f64, coarse: f64, fine: f64 },

    #[error("could not place {placed} of {requested} vehicles after {attempts} attempts")]
    Packing {
        requested: usize,
        placed: usize,
        attempts: usize,
    },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("i/o error at {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidConfig(_) | Error::Scenario(_))
    }
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
