//! Monte Carlo driver and file-based entry points.

mod io;
mod sim;

use std::path::Path;

pub use io::{
    fmt_f64, read_dataset_csv, read_scores_csv, write_bins_csv, write_dataset_csv, write_smd_csv,
};
pub use sim::{
    read_results_csv, run_simulation, summarize, write_outputs, write_results_csv, RepRecord,
    SimConfig, SimOutput, REP_RECORD_FIELDS, RESOLVED_CONFIG_FILE, RESULTS_FILE, SUMMARY_FILE,
    TIMINGS_FILE,
};

use crate::config::{Algorithm, EstimatorConfig};
use crate::error::{Error, Result};
use crate::estimators::{estimate_ate, EstimateResult};

/// Runs an estimator on a CSV dataset. No ground truth is available, so the
/// oracle algorithm is rejected.
pub fn estimate_from_file(
    path: &Path,
    config: &EstimatorConfig,
    seed: u64,
) -> Result<EstimateResult> {
    config.validate()?;
    if config.algorithm == Algorithm::Oracle {
        return Err(Error::InvalidConfig(
            "the oracle algorithm needs simulated data".into(),
        ));
    }
    let data = read_dataset_csv(path)?;
    estimate_ate(&data, config, seed, None)
}
