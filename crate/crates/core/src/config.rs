//! Estimator configuration.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::LearnerSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Irm,
    Plr,
    Ipw,
}

/// Sample-splitting scheme for propensity estimation and calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Plain K-fold cross-fitting, no calibration.
    Alg1,
    /// Nested split of each training partition into a learner part and a calibration part.
    Alg2,
    /// Calibrate on each held-out fold using that fold's own labels.
    Alg3,
    /// Independent two-fold partition for the propensity, calibrated on its held-out half.
    Alg4,
    /// One calibrator fitted on all cross-fitted propensity scores.
    Alg5,
    /// True propensities from the data-generating process.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    None,
    Isotonic,
    Platt,
    VennAbers,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Irm => "irm",
            Model::Plr => "plr",
            Model::Ipw => "ipw",
        }
    }
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
            Algorithm::Alg3 => "alg3",
            Algorithm::Alg4 => "alg4",
            Algorithm::Alg5 => "alg5",
            Algorithm::Oracle => "oracle",
        }
    }

    fn display_name(self) -> &'static str {
        match self {
            Algorithm::Alg1 => "Alg-1-uncalib",
            Algorithm::Alg2 => "Alg-2-nested-cf",
            Algorithm::Alg3 => "Alg-3-cf",
            Algorithm::Alg4 => "Alg-4-single-split",
            Algorithm::Alg5 => "Alg-5-full-sample",
            Algorithm::Oracle => "Oracle",
        }
    }
}

impl CalibrationMethod {
    pub fn name(self) -> &'static str {
        match self {
            CalibrationMethod::None => "none",
            CalibrationMethod::Isotonic => "isotonic",
            CalibrationMethod::Platt => "platt",
            CalibrationMethod::VennAbers => "venn_abers",
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            CalibrationMethod::None => "",
            CalibrationMethod::Isotonic => "-Iso",
            CalibrationMethod::Platt => "-Platt",
            CalibrationMethod::VennAbers => "-VA",
        }
    }
}

macro_rules! impl_from_str {
    ($ty:ty, $what:literal, [$($s:literal => $v:expr),+ $(,)?]) => {
        impl std::str::FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($s => Ok($v),)+
                    other => Err(Error::InvalidConfig(format!(concat!("unknown ", $what, " `{}`"), other))),
                }
            }
        }
    };
}

impl_from_str!(Model, "model", ["irm" => Model::Irm, "plr" => Model::Plr, "ipw" => Model::Ipw]);
impl_from_str!(Algorithm, "algorithm", [
    "alg1" => Algorithm::Alg1, "alg2" => Algorithm::Alg2, "alg3" => Algorithm::Alg3,
    "alg4" => Algorithm::Alg4, "alg5" => Algorithm::Alg5, "oracle" => Algorithm::Oracle,
]);
impl_from_str!(CalibrationMethod, "calibration", [
    "none" => CalibrationMethod::None, "isotonic" => CalibrationMethod::Isotonic,
    "platt" => CalibrationMethod::Platt, "venn_abers" => CalibrationMethod::VennAbers,
    "venn-abers" => CalibrationMethod::VennAbers,
]);

pub const DEFAULT_CLIP: f64 = 1e-12;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_CALIB_FRACTION: f64 = 0.5;
pub const DEFAULT_ALPHA: f64 = 0.05;

fn default_clip() -> f64 {
    DEFAULT_CLIP
}
fn default_folds() -> usize {
    DEFAULT_FOLDS
}
fn default_fraction() -> f64 {
    DEFAULT_CALIB_FRACTION
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_learner_g() -> LearnerSpec {
    LearnerSpec::Linear
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub model: Model,
    pub algorithm: Algorithm,
    #[serde(default = "default_calibration")]
    pub calibration: CalibrationMethod,
    pub learner_m: LearnerSpec,
    #[serde(default = "default_learner_g")]
    pub learner_g: LearnerSpec,
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_fraction")]
    pub alg2_calib_fraction: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_calibration() -> CalibrationMethod {
    CalibrationMethod::None
}

impl EstimatorConfig {
    /// Configuration with the documented defaults for everything but the four choices.
    pub fn new(
        model: Model,
        algorithm: Algorithm,
        calibration: CalibrationMethod,
        learner_m: LearnerSpec,
        learner_g: LearnerSpec,
    ) -> Self {
        Self {
            model,
            algorithm,
            calibration,
            learner_m,
            learner_g,
            clip: DEFAULT_CLIP,
            folds: DEFAULT_FOLDS,
            alg2_calib_fraction: DEFAULT_CALIB_FRACTION,
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn with_clip(mut self, clip: f64) -> Self {
        self.clip = clip;
        self
    }

    pub fn with_folds(mut self, folds: usize) -> Self {
        self.folds = folds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0 && self.clip < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "clip threshold {} not in (0, 0.5)",
                self.clip
            )));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "folds = {} (need >= 2)",
                self.folds
            )));
        }
        if !(self.alg2_calib_fraction > 0.0 && self.alg2_calib_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alg2_calib_fraction {} not in (0, 1)",
                self.alg2_calib_fraction
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha {} not in (0, 1)",
                self.alpha
            )));
        }
        if self.algorithm == Algorithm::Alg1 && self.calibration != CalibrationMethod::None {
            return Err(Error::InvalidConfig(
                "alg1 is the uncalibrated algorithm; calibration must be `none`".into(),
            ));
        }
        if self.model == Model::Ipw
            && !matches!(
                self.algorithm,
                Algorithm::Alg1 | Algorithm::Alg5 | Algorithm::Oracle
            )
        {
            return Err(Error::InvalidConfig(format!(
                "model ipw supports alg1, alg5 and oracle, not {}",
                self.algorithm.name()
            )));
        }
        self.learner_m.validate()?;
        self.learner_g.validate()?;
        Ok(())
    }

    /// Human-readable label following the `Alg-3-cf-Iso` naming scheme.
    pub fn label(&self) -> String {
        let calib = if self.algorithm == Algorithm::Oracle {
            ""
        } else {
            self.calibration.suffix()
        };
        format!(
            "{} {}{} m={} g={} clip={:e}",
            self.model.name().to_ascii_uppercase(),
            self.algorithm.display_name(),
            calib,
            self.learner_m.kind_name(),
            self.learner_g.kind_name(),
            self.clip
        )
    }
}

impl fmt::Display for EstimatorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}
