//! Score functions and the linear-score solver.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Per-row components of a score linear in θ: `ψ(θ) = ψ_a·θ + ψ_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreComponents {
    pub psi_a: Vec<f64>,
    pub psi_b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolution {
    pub theta_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub j0: f64,
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

fn check_open(m: &[f64]) -> Result<()> {
    match m.iter().position(|&v| !(v > 0.0 && v < 1.0)) {
        Some(row) => Err(Error::UnclippedPropensity { row, value: m[row] }),
        None => Ok(()),
    }
}

fn check_len(data: &Dataset, v: &[f64]) -> Result<()> {
    if v.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            got: v.len(),
        });
    }
    Ok(())
}

/// Doubly robust score for the ATE.
pub fn irm_score(data: &Dataset, m: &[f64], g1: &[f64], g0: &[f64]) -> Result<ScoreComponents> {
    for v in [m, g1, g0] {
        check_len(data, v)?;
    }
    check_open(m)?;
    let psi_b = (0..data.n())
        .map(|i| {
            let (y, d) = (data.y()[i], data.d()[i]);
            g1[i] - g0[i] + d * (y - g1[i]) / m[i] - (1.0 - d) * (y - g0[i]) / (1.0 - m[i])
        })
        .collect();
    Ok(ScoreComponents {
        psi_a: vec![-1.0; data.n()],
        psi_b,
    })
}

/// Partialling-out score with `v = d − m` and `u = y − l`.
pub fn plr_score(data: &Dataset, m: &[f64], l: &[f64]) -> Result<ScoreComponents> {
    check_len(data, m)?;
    check_len(data, l)?;
    let (psi_a, psi_b) = (0..data.n())
        .map(|i| {
            let v = data.d()[i] - m[i];
            let u = data.y()[i] - l[i];
            (-v * v, u * v)
        })
        .unzip();
    Ok(ScoreComponents { psi_a, psi_b })
}

pub fn solve_linear_score(c: &ScoreComponents, alpha: f64) -> Result<(LinearSolution, Vec<f64>)> {
    let n = c.psi_a.len();
    if n == 0 || c.psi_b.len() != n {
        return Err(Error::InvalidData(
            "score components must be aligned and nonempty".into(),
        ));
    }
    let nf = n as f64;
    let j0 = c.psi_a.iter().sum::<f64>() / nf;
    if !(j0.abs() >= 1e-12) {
        return Err(Error::DegenerateJacobian(j0));
    }
    let theta = -(c.psi_b.iter().sum::<f64>() / nf) / j0;
    let psi: Vec<f64> = c
        .psi_a
        .iter()
        .zip(&c.psi_b)
        .map(|(a, b)| a * theta + b)
        .collect();
    let sigma2 = psi.iter().map(|v| v * v).sum::<f64>() / nf / (j0 * j0);
    let se = (sigma2 / nf).sqrt();
    Ok((interval(theta, se, j0, alpha), psi))
}

fn interval(theta_hat: f64, se: f64, j0: f64, alpha: f64) -> LinearSolution {
    let z = normal_quantile(1.0 - alpha / 2.0);
    LinearSolution {
        theta_hat,
        se,
        ci_low: theta_hat - z * se,
        ci_high: theta_hat + z * se,
        j0,
    }
}

/// Horvitz–Thompson estimate and its per-row summands. The standard error is
/// the sample standard deviation of the summands over `√n`.
pub fn ipw_estimate(data: &Dataset, m: &[f64], alpha: f64) -> Result<(LinearSolution, Vec<f64>)> {
    check_len(data, m)?;
    check_open(m)?;
    let n = data.n();
    let terms: Vec<f64> = (0..n)
        .map(|i| {
            let (y, d) = (data.y()[i], data.d()[i]);
            d * y / m[i] - (1.0 - d) * y / (1.0 - m[i])
        })
        .collect();
    let nf = n as f64;
    let theta = terms.iter().sum::<f64>() / nf;
    let var = if n > 1 {
        terms.iter().map(|t| (t - theta).powi(2)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    let psi = terms.iter().map(|t| t - theta).collect();
    Ok((interval(theta, (var / nf).sqrt(), -1.0, alpha), psi))
}
