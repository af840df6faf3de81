//! Double machine learning ATE estimation with calibrated propensity scores.

pub mod calibration;
pub mod config;
pub mod data;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod folds;
pub mod harness;
pub mod learners;
pub mod metrics;
pub mod seed;

pub use config::{Algorithm, CalibrationMethod, EstimatorConfig, Model};
pub use data::{Dataset, GroundTruth};
pub use error::{Error, Result};
pub use estimators::{estimate_ate, EstimateResult};
pub use harness::{run_simulation, SimConfig};
