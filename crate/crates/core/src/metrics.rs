//! Calibration and balance diagnostics plus Monte Carlo summaries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binning {
    Uniform,
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinRow {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub treated_count: usize,
    pub mean_prediction: f64,
    pub treated_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinTable {
    pub rows: Vec<BinRow>,
}

impl BinTable {
    pub fn total(&self) -> usize {
        self.rows.iter().map(|r| r.count).sum()
    }
}

/// Right-closed edges at empirical quantiles, duplicates removed. Bin `j`
/// holds values in `(edges[j], edges[j + 1]]`; the first bin also holds the minimum.
pub fn quantile_edges(probs: &[f64], n_bins: usize) -> Vec<f64> {
    let mut sorted = probs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges = vec![sorted[0]];
    for j in 1..n_bins {
        let pos = (j * n).div_ceil(n_bins).max(1) - 1;
        edges.push(sorted[pos]);
    }
    edges.push(sorted[n - 1]);
    edges.dedup();
    if edges.len() == 1 {
        edges.push(edges[0]);
    }
    edges
}

fn uniform_edges(n_bins: usize) -> Vec<f64> {
    (0..=n_bins).map(|i| i as f64 / n_bins as f64).collect()
}

fn assign(p: f64, edges: &[f64], binning: Binning) -> usize {
    let bins = edges.len() - 1;
    match binning {
        Binning::Uniform => ((p * bins as f64).floor() as usize).min(bins - 1),
        Binning::Quantile => edges[1..].partition_point(|&e| e < p).min(bins - 1),
    }
}

pub fn bin_table(
    probs: &[f64],
    labels: &[f64],
    n_bins: usize,
    binning: Binning,
) -> Result<BinTable> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            got: labels.len(),
        });
    }
    if n_bins == 0 {
        return Err(Error::InvalidConfig("need at least one bin".into()));
    }
    if probs.is_empty() {
        return Err(Error::InvalidData("no predictions to bin".into()));
    }
    let edges = match binning {
        Binning::Uniform => uniform_edges(n_bins),
        Binning::Quantile => quantile_edges(probs, n_bins),
    };
    let bins = edges.len() - 1;
    let mut count = vec![0usize; bins];
    let mut treated = vec![0usize; bins];
    let mut sum_p = vec![0.0; bins];
    for (&p, &l) in probs.iter().zip(labels) {
        let b = assign(p, &edges, binning);
        count[b] += 1;
        treated[b] += (l == 1.0) as usize;
        sum_p[b] += p;
    }
    let rows = (0..bins)
        .map(|b| {
            let c = count[b] as f64;
            BinRow {
                lower: edges[b],
                upper: edges[b + 1],
                count: count[b],
                treated_count: treated[b],
                mean_prediction: if count[b] > 0 { sum_p[b] / c } else { f64::NAN },
                treated_fraction: if count[b] > 0 {
                    treated[b] as f64 / c
                } else {
                    f64::NAN
                },
            }
        })
        .collect();
    Ok(BinTable { rows })
}

/// Binned calibration error `(Σ (n_i/N)·|acc_i − conf_i|^p)^(1/p)`.
pub fn ece(
    probs: &[f64],
    labels: &[f64],
    n_bins: usize,
    binning: Binning,
    p_norm: f64,
) -> Result<f64> {
    if !(p_norm >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "ece norm {p_norm} must be >= 1"
        )));
    }
    let table = bin_table(probs, labels, n_bins, binning)?;
    let n = probs.len() as f64;
    let s: f64 = table
        .rows
        .iter()
        .filter(|r| r.count > 0)
        .map(|r| r.count as f64 / n * (r.treated_fraction - r.mean_prediction).abs().powf(p_norm))
        .sum();
    Ok(s.powf(1.0 / p_norm))
}

pub fn overlap_ratio_bins(probs: &[f64], labels: &[f64], n_bins: usize) -> Result<BinTable> {
    bin_table(probs, labels, n_bins, Binning::Uniform)
}

fn weighted_moments(v: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = v.collect();
    let v1: f64 = pts.iter().map(|p| p.1).sum();
    let v2: f64 = pts.iter().map(|p| p.1 * p.1).sum();
    let mean = pts.iter().map(|p| p.0 * p.1).sum::<f64>() / v1;
    let ss: f64 = pts.iter().map(|p| p.1 * (p.0 - mean).powi(2)).sum();
    // Frequency-weight divisor; equals n − 1 for unit weights.
    (mean, ss / (v1 - v2 / v1))
}

/// Standardized mean differences per covariate. Covariates with zero pooled
/// variance come back as NaN and are listed in the second element.
pub fn smd(x: &DMatrix<f64>, d: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
    let n = x.nrows();
    if d.len() != n || w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: d.len().min(w.len()),
        });
    }
    if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidData(
            "balance weights must be positive".into(),
        ));
    }
    let n1 = d.iter().filter(|&&v| v == 1.0).count();
    if n1 < 2 || n - n1 < 2 {
        return Err(Error::InvalidData(
            "each treatment group needs at least two rows".into(),
        ));
    }
    let mut out = Vec::with_capacity(x.ncols());
    let mut degenerate = Vec::new();
    for k in 0..x.ncols() {
        let col = x.column(k);
        let group =
            |t: f64| weighted_moments((0..n).filter(move |&i| d[i] == t).map(|i| (col[i], w[i])));
        let (m1, s1) = group(1.0);
        let (m0, s0) = group(0.0);
        let pooled = ((s1 + s0) / 2.0).sqrt();
        if pooled > 0.0 && pooled.is_finite() {
            out.push((m1 - m0) / pooled);
        } else {
            out.push(f64::NAN);
            degenerate.push(k);
        }
    }
    Ok((out, degenerate))
}

/// Inverse-propensity weights `1/m̃` for treated rows and `1/(1 − m̃)` for controls.
pub fn ipw_weights(d: &[f64], m: &[f64]) -> Vec<f64> {
    d.iter()
        .zip(m)
        .map(|(&d, &m)| if d == 1.0 { 1.0 / m } else { 1.0 / (1.0 - m) })
        .collect()
}

pub fn normalization_sums(d: &[f64], m: &[f64]) -> (f64, f64) {
    let n = d.len() as f64;
    let t: f64 = d.iter().zip(m).map(|(&d, &m)| d / m).sum();
    let c: f64 = d.iter().zip(m).map(|(&d, &m)| (1.0 - d) / (1.0 - m)).sum();
    (t / n, c / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryStats {
    pub mae: f64,
    pub rmse: f64,
    pub std_dev: f64,
    pub coverage: f64,
    pub mean_ci_length: f64,
    pub reps: usize,
}

/// Summaries over repetitions `(theta_hat, ci_low, ci_high)`. Repetitions with
/// a non-finite estimate are skipped and not counted in `reps`. `std_dev` uses
/// the n − 1 divisor, so `rmse² = bias² + std_dev²·(reps − 1)/reps`.
pub fn aggregate(results: &[(f64, f64, f64)], theta_true: f64) -> SummaryStats {
    let ok: Vec<&(f64, f64, f64)> = results.iter().filter(|r| r.0.is_finite()).collect();
    let k = ok.len();
    if k == 0 {
        return SummaryStats {
            mae: f64::NAN,
            rmse: f64::NAN,
            std_dev: f64::NAN,
            coverage: f64::NAN,
            mean_ci_length: f64::NAN,
            reps: 0,
        };
    }
    let kf = k as f64;
    let mae = ok.iter().map(|r| (r.0 - theta_true).abs()).sum::<f64>() / kf;
    let rmse = (ok.iter().map(|r| (r.0 - theta_true).powi(2)).sum::<f64>() / kf).sqrt();
    let mean = ok.iter().map(|r| r.0).sum::<f64>() / kf;
    let std_dev = if k > 1 {
        (ok.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (kf - 1.0)).sqrt()
    } else {
        0.0
    };
    let coverage = ok
        .iter()
        .filter(|r| r.1 <= theta_true && theta_true <= r.2)
        .count() as f64
        / kf;
    let mean_ci_length = ok.iter().map(|r| r.2 - r.1).sum::<f64>() / kf;
    SummaryStats {
        mae,
        rmse,
        std_dev,
        coverage,
        mean_ci_length,
        reps: k,
    }
}
