//! Cross-fitted ATE estimators with optional propensity calibration.

mod mse;
mod score;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

pub use mse::{decompose_mse, MseDecomposition};
pub use score::{
    ipw_estimate, irm_score, normal_quantile, plr_score, solve_linear_score, LinearSolution,
    ScoreComponents,
};

use crate::calibration::{clip_probs, fit_calibrator};
use crate::config::{Algorithm, CalibrationMethod, EstimatorConfig, Model};
use crate::data::{Dataset, GroundTruth};
use crate::error::{Error, Result};
use crate::folds::{make_folds, split_within, FoldPartition};
use crate::learners::{fit_classifier, fit_regressor, LearnerSpec};
use crate::metrics::{ece, normalization_sums, Binning, DEFAULT_BINS};
use crate::seed::{mix64, stream};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub theta_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Score at the estimate, one entry per row.
    #[serde(skip)]
    pub psi: Vec<f64>,
    /// Propensities entering the score, after calibration and clipping.
    #[serde(skip)]
    pub m_used: Vec<f64>,
    /// Cross-fitted propensities before calibration and clipping.
    #[serde(skip)]
    pub m_raw: Vec<f64>,
    pub diagnostics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

/// Cross-fitted outcome predictions.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeNuisance {
    Irm { g1: Vec<f64>, g0: Vec<f64> },
    Plr { l: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceEstimates {
    pub m_raw: Vec<f64>,
    pub m_hat: Vec<f64>,
    pub outcome: Option<OutcomeNuisance>,
    pub folds: FoldPartition,
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    x.select_rows(idx.iter())
}

fn pick(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

fn push_warning(warnings: &mut Vec<String>, context: &str, w: Option<String>) {
    if let Some(w) = w {
        warnings.push(format!("{context}: {w}"));
    }
}

/// Trains the propensity learner on `train` and predicts on `test`.
fn propensity_scores(
    data: &Dataset,
    spec: &LearnerSpec,
    train: &[usize],
    test: &[usize],
    seed: u64,
    context: &str,
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>> {
    let fit = fit_classifier(spec, &rows(data.x(), train), &pick(data.d(), train), seed)?;
    push_warning(warnings, context, fit.warning);
    fit.model.predict(&rows(data.x(), test))
}

fn calibrate(
    method: CalibrationMethod,
    fit_scores: &[f64],
    fit_labels: &[f64],
    apply_to: &[f64],
    context: &str,
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>> {
    let c = fit_calibrator(method, fit_scores, fit_labels)?;
    push_warning(warnings, context, c.warning);
    Ok(c.calibrator.apply(apply_to))
}

fn cross_fit_outcome(
    data: &Dataset,
    model: Model,
    spec: &LearnerSpec,
    folds: &FoldPartition,
    seed: u64,
    warnings: &mut Vec<String>,
) -> Result<OutcomeNuisance> {
    let n = data.n();
    let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
    for k in 0..folds.k() {
        let train = folds.train_indices(k);
        let test = folds.test_indices(k);
        let x_test = rows(data.x(), &test);
        let arms: Vec<(f64, &mut Vec<f64>)> = match model {
            Model::Irm => vec![(1.0, &mut a), (0.0, &mut b)],
            _ => vec![(f64::NAN, &mut a)],
        };
        for (arm, out) in arms {
            let idx: Vec<usize> = if arm.is_nan() {
                train.clone()
            } else {
                train
                    .iter()
                    .copied()
                    .filter(|&i| data.d()[i] == arm)
                    .collect()
            };
            if idx.is_empty() {
                return Err(Error::InvalidData(format!(
                    "fold {k}: no training rows with d = {arm} for the outcome regression"
                )));
            }
            let s = mix64(seed, stream::LEARNER_G + 2 * k as u64 + (arm == 0.0) as u64);
            let fit = fit_regressor(spec, &rows(data.x(), &idx), &pick(data.y(), &idx), s)?;
            push_warning(warnings, &format!("outcome fold {k}"), fit.warning);
            for (&i, v) in test.iter().zip(fit.model.predict(&x_test)?) {
                out[i] = v;
            }
        }
    }
    Ok(match model {
        Model::Irm => OutcomeNuisance::Irm { g1: a, g0: b },
        _ => OutcomeNuisance::Plr { l: a },
    })
}

/// Propensity pipeline for one algorithm. Returns raw and calibrated scores.
fn propensity_pipeline(
    data: &Dataset,
    config: &EstimatorConfig,
    folds: &FoldPartition,
    seed: u64,
    truth: Option<&GroundTruth>,
    warnings: &mut Vec<String>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = data.n();
    let d = data.d();
    let spec = &config.learner_m;
    let method = config.calibration;
    let mut raw = vec![0.0; n];
    let mut cal = vec![0.0; n];
    let learner_seed = |j: u64| mix64(seed, stream::LEARNER_M + j);
    match config.algorithm {
        Algorithm::Alg1 | Algorithm::Alg5 => {
            for k in 0..folds.k() {
                let test = folds.test_indices(k);
                let s = propensity_scores(
                    data,
                    spec,
                    &folds.train_indices(k),
                    &test,
                    learner_seed(k as u64),
                    &format!("propensity fold {k}"),
                    warnings,
                )?;
                for (&i, v) in test.iter().zip(s) {
                    raw[i] = v;
                }
            }
            cal = if config.algorithm == Algorithm::Alg5 {
                calibrate(method, &raw, d, &raw, "full-sample calibration", warnings)?
            } else {
                raw.clone()
            };
        }
        Algorithm::Alg2 => {
            let split_seed = mix64(seed, stream::INNER_SPLIT);
            for k in 0..folds.k() {
                let test = folds.test_indices(k);
                let (fit_part, cal_part) = split_within(
                    &folds.train_indices(k),
                    1.0 - config.alg2_calib_fraction,
                    mix64(split_seed, k as u64),
                )?;
                let mut both = cal_part.clone();
                both.extend_from_slice(&test);
                let ctx = format!("propensity fold {k}");
                let s = propensity_scores(
                    data,
                    spec,
                    &fit_part,
                    &both,
                    learner_seed(k as u64),
                    &ctx,
                    warnings,
                )?;
                let (s_cal, s_test) = s.split_at(cal_part.len());
                let c = calibrate(
                    method,
                    s_cal,
                    &pick(d, &cal_part),
                    s_test,
                    &format!("calibration fold {k}"),
                    warnings,
                )?;
                for ((&i, &r), v) in test.iter().zip(s_test).zip(c) {
                    raw[i] = r;
                    cal[i] = v;
                }
            }
        }
        Algorithm::Alg3 => {
            for k in 0..folds.k() {
                let test = folds.test_indices(k);
                let ctx = format!("propensity fold {k}");
                let s = propensity_scores(
                    data,
                    spec,
                    &folds.train_indices(k),
                    &test,
                    learner_seed(k as u64),
                    &ctx,
                    warnings,
                )?;
                let c = calibrate(
                    method,
                    &s,
                    &pick(d, &test),
                    &s,
                    &format!("calibration fold {k}"),
                    warnings,
                )?;
                for ((&i, &r), v) in test.iter().zip(&s).zip(c) {
                    raw[i] = r;
                    cal[i] = v;
                }
            }
        }
        Algorithm::Alg4 => {
            let second = make_folds(n, 2, mix64(seed, stream::SECOND_PARTITION))?;
            for j in 0..2 {
                let part = second.test_indices(j);
                let ctx = format!("propensity half {j}");
                let s = propensity_scores(
                    data,
                    spec,
                    &second.train_indices(j),
                    &part,
                    learner_seed(0x80 + j as u64),
                    &ctx,
                    warnings,
                )?;
                let c = calibrate(
                    method,
                    &s,
                    &pick(d, &part),
                    &s,
                    &format!("calibration half {j}"),
                    warnings,
                )?;
                for ((&i, &r), v) in part.iter().zip(&s).zip(c) {
                    raw[i] = r;
                    cal[i] = v;
                }
            }
        }
        Algorithm::Oracle => {
            let t = truth.ok_or_else(|| {
                Error::InvalidConfig("the oracle algorithm needs the true propensities".into())
            })?;
            if t.m0.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: t.m0.len(),
                });
            }
            raw = t.m0.clone();
            cal = t.m0.clone();
        }
    }
    Ok((raw, cal))
}

/// Fits all nuisances for `config` on `data`. The outcome nuisance is absent for IPW.
pub fn fit_nuisances(
    data: &Dataset,
    config: &EstimatorConfig,
    seed: u64,
    truth: Option<&GroundTruth>,
    warnings: &mut Vec<String>,
) -> Result<NuisanceEstimates> {
    config.validate()?;
    let folds = make_folds(data.n(), config.folds, mix64(seed, stream::FOLDS))?;
    let outcome = match config.model {
        Model::Ipw => None,
        m => Some(cross_fit_outcome(
            data,
            m,
            &config.learner_g,
            &folds,
            seed,
            warnings,
        )?),
    };
    let (m_raw, cal) = propensity_pipeline(data, config, &folds, seed, truth, warnings)?;
    let m_hat = clip_probs(&cal, config.clip)?;
    Ok(NuisanceEstimates {
        m_raw,
        m_hat,
        outcome,
        folds,
    })
}

/// Runs one estimator end to end. `truth` is required for the oracle algorithm
/// and otherwise ignored.
pub fn estimate_ate(
    data: &Dataset,
    config: &EstimatorConfig,
    seed: u64,
    truth: Option<&GroundTruth>,
) -> Result<EstimateResult> {
    let mut warnings = Vec::new();
    let nu = fit_nuisances(data, config, seed, truth, &mut warnings)?;
    let (sol, psi) = match &nu.outcome {
        None => ipw_estimate(data, &nu.m_hat, config.alpha)?,
        Some(OutcomeNuisance::Irm { g1, g0 }) => {
            solve_linear_score(&irm_score(data, &nu.m_hat, g1, g0)?, config.alpha)?
        }
        Some(OutcomeNuisance::Plr { l }) => {
            solve_linear_score(&plr_score(data, &nu.m_hat, l)?, config.alpha)?
        }
    };
    let mut diagnostics = BTreeMap::new();
    let d = data.d();
    let (nt, nc) = normalization_sums(d, &nu.m_hat);
    diagnostics.insert("j0".to_string(), sol.j0);
    diagnostics.insert("norm_treated".to_string(), nt);
    diagnostics.insert("norm_control".to_string(), nc);
    diagnostics.insert(
        "ece_uniform".to_string(),
        ece(&nu.m_hat, d, DEFAULT_BINS, Binning::Uniform, 1.0)?,
    );
    diagnostics.insert(
        "ece_quantile".to_string(),
        ece(&nu.m_hat, d, DEFAULT_BINS, Binning::Quantile, 1.0)?,
    );
    let max_w = nu
        .m_hat
        .iter()
        .map(|&m| (1.0 / m).max(1.0 / (1.0 - m)))
        .fold(0.0, f64::max);
    diagnostics.insert("max_weight".to_string(), max_w);
    Ok(EstimateResult {
        theta_hat: sol.theta_hat,
        se: sol.se,
        ci_low: sol.ci_low,
        ci_high: sol.ci_high,
        psi,
        m_used: nu.m_hat,
        m_raw: nu.m_raw,
        diagnostics,
        warnings,
    })
}
