//! Post-hoc probability calibration and clipping.

mod isotonic;
mod platt;
mod venn_abers;

pub use isotonic::{isotonic_fit, isotonic_predict, pava, IsotonicFit};
pub use platt::{platt_fit, platt_nll, platt_targets, PlattFit};
pub use venn_abers::{venn_abers, venn_abers_combine, VennAbersFit, VennAbersOutput};

use crate::config::CalibrationMethod;
use crate::error::{Error, Result};

pub fn clip_probs(p: &[f64], threshold: f64) -> Result<Vec<f64>> {
    if !(threshold > 0.0 && threshold < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "clip threshold {threshold} not in (0, 0.5)"
        )));
    }
    Ok(p.iter()
        .map(|&v| v.clamp(threshold, 1.0 - threshold))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedCalibrator {
    Identity,
    Constant(f64),
    Isotonic(IsotonicFit),
    Platt(PlattFit),
    VennAbers(VennAbersFit),
}

impl FittedCalibrator {
    pub fn apply(&self, scores: &[f64]) -> Vec<f64> {
        match self {
            Self::Identity => scores.to_vec(),
            Self::Constant(c) => vec![*c; scores.len()],
            Self::Isotonic(f) => f.predict_many(scores),
            Self::Platt(f) => scores.iter().map(|&s| f.predict(s)).collect(),
            Self::VennAbers(f) => scores.iter().map(|&s| f.predict(s).p).collect(),
        }
    }
}

/// A calibrator plus the warning raised when the calibration labels held a single class.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub calibrator: FittedCalibrator,
    pub warning: Option<String>,
}

pub fn fit_calibrator(
    method: CalibrationMethod,
    scores: &[f64],
    labels: &[f64],
) -> Result<Calibration> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if method == CalibrationMethod::None {
        return Ok(Calibration {
            calibrator: FittedCalibrator::Identity,
            warning: None,
        });
    }
    if scores.is_empty() {
        return Err(Error::InvalidData("empty calibration set".into()));
    }
    let n = labels.len();
    let n1 = labels.iter().filter(|&&v| v == 1.0).count();
    if n1 == 0 || n1 == n {
        let (t0, t1) = platt_targets(n - n1, n1);
        let value = if n1 == 0 { t0 } else { t1 };
        return Ok(Calibration {
            calibrator: FittedCalibrator::Constant(value),
            warning: Some(format!(
                "calibration labels are all {} (n = {n}); using constant {value:.6}",
                if n1 == 0 { 0 } else { 1 }
            )),
        });
    }
    let calibrator = match method {
        CalibrationMethod::None => unreachable!(),
        CalibrationMethod::Isotonic => FittedCalibrator::Isotonic(isotonic_fit(scores, labels)?),
        CalibrationMethod::Platt => FittedCalibrator::Platt(platt_fit(scores, labels)?),
        CalibrationMethod::VennAbers => {
            FittedCalibrator::VennAbers(VennAbersFit::new(scores, labels)?)
        }
    };
    Ok(Calibration {
        calibrator,
        warning: None,
    })
}
