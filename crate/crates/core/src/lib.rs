//! Optimized multiparameter squeezing for distributed sensing with linear
//! and measurement-after-interaction (MAI) readout.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common double-precision case.

pub mod error;
pub mod gaussian_cv;
pub mod linalg;
pub mod optimizer;
pub mod oracle;
pub mod scalar;
pub mod spin_moments;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use spin_moments::{Preparation, Strategy};

pub type SpinScenarioF64 = spin_moments::SpinScenario<f64>;
pub type BlockSetF64 = spin_moments::BlockSet<f64>;
pub type MomentDataF64 = spin_moments::MomentData<f64>;
pub type MatrixF64 = linalg::Matrix<f64>;
pub type GeneratorSpecF64 = optimizer::GeneratorSpec<f64>;
pub type EstimationTargetF64 = optimizer::EstimationTarget<f64>;
pub type SqueezingOutcomeF64 = optimizer::SqueezingOutcome<f64>;
pub type GaussianScenarioF64 = gaussian_cv::GaussianScenario<f64>;
pub type CollectiveStateF64 = oracle::CollectiveState<f64>;
