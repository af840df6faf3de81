//! Nuisance learners for the propensity score and the outcome regressions.

mod forest;
mod gbt;
mod linear;
mod logistic;
mod tree;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forest::{fit_rf, ForestModel, RfParams};
pub use gbt::{fit_gbt, GbtModel, GbtParams, Loss};
pub use linear::{fit_linear, LinearModel};
pub use logistic::{expit, fit_logistic, logistic_objective, logit, LogisticModel, LogitParams};
pub use tree::{fit_tree, fit_tree_presorted, SortedColumns, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerSpec {
    Logit(LogitParams),
    Linear,
    Gbt(GbtParams),
    Rf(RfParams),
}

impl LearnerSpec {
    pub fn logit() -> Self {
        Self::Logit(LogitParams::default())
    }

    pub fn gbt() -> Self {
        Self::Gbt(GbtParams::default())
    }

    pub fn rf() -> Self {
        Self::Rf(RfParams::default())
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Logit(_) => "logit",
            Self::Linear => "linear",
            Self::Gbt(_) => "gbt",
            Self::Rf(_) => "rf",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self {
            Self::Logit(p) => {
                if !(p.l2 >= 0.0 && p.l2.is_finite()) {
                    return bad(format!("logit l2 = {} must be finite and >= 0", p.l2));
                }
                if p.max_iter == 0 || !(p.tol > 0.0) {
                    return bad("logit needs max_iter >= 1 and tol > 0".into());
                }
            }
            Self::Linear => {}
            Self::Gbt(p) => {
                if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
                    return bad(format!(
                        "gbt learning_rate = {} must be > 0",
                        p.learning_rate
                    ));
                }
                if p.min_leaf == 0 {
                    return bad("gbt min_leaf must be >= 1".into());
                }
            }
            Self::Rf(p) => {
                if p.trees == 0 || p.min_leaf == 0 {
                    return bad("rf needs trees >= 1 and min_leaf >= 1".into());
                }
                if let Some(f) = p.feature_fraction {
                    if !(f > 0.0 && f <= 1.0) {
                        return bad(format!("rf feature_fraction = {f} not in (0, 1]"));
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind_name())
    }
}

/// Accepts a bare kind name with default parameters or a JSON object.
impl FromStr for LearnerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            let spec: Self = serde_json::from_str(s)?;
            spec.validate()?;
            return Ok(spec);
        }
        match s.to_ascii_lowercase().as_str() {
            "logit" => Ok(Self::logit()),
            "linear" => Ok(Self::Linear),
            "gbt" => Ok(Self::gbt()),
            "rf" => Ok(Self::rf()),
            other => Err(Error::InvalidConfig(format!(
                "unknown learner `{other}` (expected logit, linear, gbt or rf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Constant { value: f64, p: usize },
    Logit(LogisticModel),
    Linear { model: LinearModel, clamp: bool },
    Gbt(GbtModel),
    Rf(ForestModel),
}

impl FittedModel {
    pub fn p(&self) -> usize {
        match self {
            Self::Constant { p, .. } => *p,
            Self::Logit(m) => m.p(),
            Self::Linear { model, .. } => model.slopes().len(),
            Self::Gbt(m) => m.p(),
            Self::Rf(m) => m.p(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant { .. })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: x.ncols(),
            });
        }
        Ok(match self {
            Self::Constant { value, .. } => vec![*value; x.nrows()],
            Self::Logit(m) => m.predict(x),
            Self::Linear { model, clamp } => {
                let mut v = model.predict(x);
                if *clamp {
                    v.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
                }
                v
            }
            Self::Gbt(m) => m.predict(x),
            Self::Rf(m) => m.predict(x),
        })
    }
}

/// A fitted learner plus any warning raised while fitting it.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub model: FittedModel,
    pub warning: Option<String>,
}

fn check_rows(x: &DMatrix<f64>, t: &[f64]) -> Result<()> {
    if x.nrows() != t.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: t.len(),
        });
    }
    if t.is_empty() {
        return Err(Error::InvalidData(
            "cannot fit a learner on zero rows".into(),
        ));
    }
    Ok(())
}

fn binary(t: &[f64]) -> bool {
    t.iter().all(|&v| v == 0.0 || v == 1.0)
}

/// With a single class present there is nothing to learn; fall back to the
/// add-one smoothed rate.
fn single_class(x: &DMatrix<f64>, t: &[f64]) -> Option<Fit> {
    let n1 = t.iter().filter(|&&v| v == 1.0).count();
    let n = t.len();
    let value = if n1 == n {
        (n1 as f64 + 1.0) / (n1 as f64 + 2.0)
    } else if n1 == 0 {
        1.0 / (n as f64 + 2.0)
    } else {
        return None;
    };
    Some(Fit {
        model: FittedModel::Constant {
            value,
            p: x.ncols(),
        },
        warning: Some(format!(
            "training labels are all {} (n = {n}); using constant {value:.6}",
            if n1 == 0 { 0 } else { 1 }
        )),
    })
}

/// Fits a probability model for binary labels `d`.
pub fn fit_classifier(spec: &LearnerSpec, x: &DMatrix<f64>, d: &[f64], seed: u64) -> Result<Fit> {
    check_rows(x, d)?;
    if !binary(d) {
        return Err(Error::InvalidData(
            "classifier labels must be 0 or 1".into(),
        ));
    }
    if let Some(f) = single_class(x, d) {
        return Ok(f);
    }
    let model = match spec {
        LearnerSpec::Logit(p) => FittedModel::Logit(fit_logistic(x, d, *p)?),
        LearnerSpec::Linear => FittedModel::Linear {
            model: fit_linear(x, d)?,
            clamp: true,
        },
        LearnerSpec::Gbt(p) => FittedModel::Gbt(fit_gbt(x, d, Loss::Logistic, *p)),
        LearnerSpec::Rf(p) => {
            let frac = (x.ncols() as f64).sqrt() / x.ncols() as f64;
            FittedModel::Rf(fit_rf(x, d, *p, frac, seed))
        }
    };
    Ok(Fit {
        model,
        warning: None,
    })
}

/// Fits a conditional-mean model for `y`. A logit spec requires binary `y`.
pub fn fit_regressor(spec: &LearnerSpec, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<Fit> {
    check_rows(x, y)?;
    let model = match spec {
        LearnerSpec::Logit(_) => {
            if !binary(y) {
                return Err(Error::InvalidConfig(
                    "outcome learner logit needs a binary outcome".into(),
                ));
            }
            return fit_classifier(spec, x, y, seed);
        }
        LearnerSpec::Linear => FittedModel::Linear {
            model: fit_linear(x, y)?,
            clamp: false,
        },
        LearnerSpec::Gbt(p) => FittedModel::Gbt(fit_gbt(x, y, Loss::Squared, *p)),
        LearnerSpec::Rf(p) => FittedModel::Rf(fit_rf(x, y, *p, 1.0 / 3.0, seed)),
    };
    Ok(Fit {
        model,
        warning: None,
    })
}
