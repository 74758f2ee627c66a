use thiserror::Error;

use crate::spin_moments::{Preparation, Strategy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("no closed form for {prep:?} preparation with {strategy:?} strategy")]
    NoClosedForm { prep: Preparation, strategy: Strategy },

    #[error("covariance matrix is singular along a direction the commutator probes (overlap {0:e})")]
    SingularCovariance(f64),

    #[error("moment matrix is singular; the scenario carries no phase information")]
    DegenerateMoment,

    #[error("state dimension {dim} exceeds the cap of {cap} amplitudes")]
    DimensionCap { dim: usize, cap: usize },

    #[error("empty or invalid search range [{0}, {1}]")]
    EmptyRange(f64, f64),

    #[error("invalid estimation target: {0}")]
    InvalidTarget(String),

    #[error("log-log fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
