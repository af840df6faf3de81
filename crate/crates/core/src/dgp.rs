//! Synthetic data-generating processes with known propensities and effects.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroundTruth};
use crate::error::{Error, Result};
use crate::learners::expit;
use crate::seed::rng_from;

/// E[μ(X,1) − μ(X,0)] for the binary-outcome process, by tensor Gauss–Legendre quadrature.
pub const DGP3_ATE: f64 = 0.227_753_966_855_161_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum DgpSpec {
    Dgp1 {
        n: usize,
        p: usize,
        r2_d: f64,
        #[serde(default = "half")]
        r2_y: f64,
        #[serde(default = "half")]
        theta0: f64,
    },
    Dgp2 {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<usize>,
        overlap: f64,
        #[serde(default = "one")]
        theta0: f64,
    },
    Dgp3 {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<usize>,
        #[serde(default)]
        setting: Dgp3Setting,
    },
    Dgp4 {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<usize>,
        alpha: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Dgp3Setting {
    #[default]
    A,
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

fn unit_open(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{what} = {v} not in (0, 1)")))
    }
}

fn forced_p(p: Option<usize>, want: usize, name: &str) -> Result<()> {
    match p {
        Some(p) if p != want => Err(Error::InvalidConfig(format!(
            "{name} has p = {want} fixed (got {p})"
        ))),
        _ => Ok(()),
    }
}

impl DgpSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Dgp1 { .. } => "dgp1",
            Self::Dgp2 { .. } => "dgp2",
            Self::Dgp3 { .. } => "dgp3",
            Self::Dgp4 { .. } => "dgp4",
        }
    }

    pub fn n(&self) -> usize {
        match *self {
            Self::Dgp1 { n, .. }
            | Self::Dgp2 { n, .. }
            | Self::Dgp3 { n, .. }
            | Self::Dgp4 { n, .. } => n,
        }
    }

    pub fn p(&self) -> usize {
        match *self {
            Self::Dgp1 { p, .. } => p,
            Self::Dgp2 { .. } => 3,
            Self::Dgp3 { .. } => 4,
            Self::Dgp4 { .. } => 20,
        }
    }

    /// Compact `key=value` rendering of the process parameters.
    pub fn params_label(&self) -> String {
        match *self {
            Self::Dgp1 {
                r2_d, r2_y, theta0, ..
            } => format!("r2_d={r2_d};r2_y={r2_y};theta0={theta0}"),
            Self::Dgp2 {
                overlap, theta0, ..
            } => format!("overlap={overlap};theta0={theta0}"),
            Self::Dgp3 { setting, .. } => format!("setting={setting:?}"),
            Self::Dgp4 { alpha, .. } => format!("alpha={alpha}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() < 2 {
            return Err(Error::InvalidConfig(format!(
                "n = {} (need >= 2)",
                self.n()
            )));
        }
        match *self {
            Self::Dgp1 {
                p,
                r2_d,
                r2_y,
                theta0,
                ..
            } => {
                if p == 0 {
                    return Err(Error::InvalidConfig("dgp1 needs p >= 1".into()));
                }
                unit_open(r2_d, "r2_d")?;
                unit_open(r2_y, "r2_y")?;
                finite(theta0, "theta0")
            }
            Self::Dgp2 {
                p, overlap, theta0, ..
            } => {
                forced_p(p, 3, "dgp2")?;
                unit_open(overlap, "overlap")?;
                finite(theta0, "theta0")
            }
            Self::Dgp3 { p, .. } => forced_p(p, 4, "dgp3"),
            Self::Dgp4 { p, alpha, .. } => {
                forced_p(p, 20, "dgp4")?;
                if alpha > 0.0 && alpha <= 0.5 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!(
                        "alpha = {alpha} not in (0, 0.5]"
                    )))
                }
            }
        }
    }

    pub fn generate(&self, seed: u64) -> Result<(Dataset, GroundTruth)> {
        self.validate()?;
        match *self {
            Self::Dgp1 {
                n,
                p,
                r2_d,
                r2_y,
                theta0,
            } => gen_dgp1(n, p, r2_d, r2_y, theta0, seed),
            Self::Dgp2 {
                n, overlap, theta0, ..
            } => gen_dgp2(n, overlap, theta0, seed),
            Self::Dgp3 { n, .. } => gen_dgp3(n, seed),
            Self::Dgp4 { n, alpha, .. } => gen_dgp4(n, alpha, seed),
        }
    }
}

fn finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{what} must be finite")))
    }
}

fn finish(
    y: Vec<f64>,
    d: Vec<f64>,
    x: DMatrix<f64>,
    m0: Vec<f64>,
    ate: f64,
) -> Result<(Dataset, GroundTruth)> {
    Ok((Dataset::new(y, d, x)?, GroundTruth::new(m0, ate)?))
}

/// Coefficients and index variance for the Toeplitz design.
pub fn dgp1_index(p: usize) -> (Vec<f64>, f64) {
    let beta: Vec<f64> = (1..=p).map(|j| 1.0 / (j * j) as f64).collect();
    let mut b = 0.0;
    for j in 0..p {
        for k in 0..p {
            b += beta[j] * beta[k] * 0.5f64.powi((j as i32 - k as i32).abs());
        }
    }
    (beta, b)
}

/// Scale constants `(c_d, c_y)` for the treatment and outcome indices.
pub fn dgp1_scales(p: usize, r2_d: f64, r2_y: f64) -> (f64, f64) {
    let (_, b) = dgp1_index(p);
    let c_d = ((PI * PI / 3.0) * r2_d / ((1.0 - r2_d) * b)).sqrt();
    let c_y = (r2_y / ((1.0 - r2_y) * b)).sqrt();
    (c_d, c_y)
}

pub fn gen_dgp1(
    n: usize,
    p: usize,
    r2_d: f64,
    r2_y: f64,
    theta0: f64,
    seed: u64,
) -> Result<(Dataset, GroundTruth)> {
    unit_open(r2_d, "r2_d")?;
    unit_open(r2_y, "r2_y")?;
    let (beta, _) = dgp1_index(p);
    let (c_d, c_y) = dgp1_scales(p, r2_d, r2_y);
    let sigma = DMatrix::from_fn(p, p, |j, k| 0.5f64.powi((j as i32 - k as i32).abs()));
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::Solver("Toeplitz covariance not positive definite".into()))?;
    let l = chol.l();
    let mut rng = rng_from(seed);
    let mut x = DMatrix::zeros(n, p);
    let (mut y, mut d, mut m0) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let mut z = vec![0.0; p];
    for i in 0..n {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let mut index = 0.0;
        for j in 0..p {
            let xj: f64 = (0..=j).map(|k| l[(j, k)] * z[k]).sum();
            x[(i, j)] = xj;
            index += beta[j] * xj;
        }
        let m = expit(c_d * index);
        let di = (rng.random::<f64>() < m) as u8 as f64;
        let noise: f64 = rng.sample(StandardNormal);
        y.push(theta0 * di + c_y * di * index + noise);
        d.push(di);
        m0.push(m);
    }
    finish(y, d, x, m0, theta0)
}

pub fn dgp2_propensity(overlap: f64, x: [f64; 3]) -> f64 {
    let s = (x[0] + x[1] + x[2]) / 3f64.sqrt();
    overlap / 2.0 + (1.0 - overlap) * expit(4.0 * s)
}

pub fn gen_dgp2(n: usize, overlap: f64, theta0: f64, seed: u64) -> Result<(Dataset, GroundTruth)> {
    unit_open(overlap, "overlap")?;
    let mut rng = rng_from(seed);
    let mut x = DMatrix::zeros(n, 3);
    let (mut y, mut d, mut m0) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for i in 0..n {
        let r: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        for (j, v) in r.iter().enumerate() {
            x[(i, j)] = *v;
        }
        let m = dgp2_propensity(overlap, r);
        let di = (rng.random::<f64>() < m) as u8 as f64;
        let noise: f64 = rng.sample(StandardNormal);
        y.push(theta0 * di + r[0] + 0.5 * r[1] + 0.25 * r[2] + noise);
        d.push(di);
        m0.push(m);
    }
    finish(y, d, x, m0, theta0)
}

pub fn dgp3_propensity(x: [f64; 4]) -> f64 {
    expit(-0.25 - x[0] + 0.5 * x[1] - x[2] + 0.5 * x[3])
}

pub fn dgp3_outcome_mean(x: [f64; 4], d: f64) -> f64 {
    expit(
        0.5 * (2.0 * d - 1.0) * (1.0 + 0.5 * x[0]) + x[0] * x[1] + 0.5 * (PI * x[2]).cos()
            - 0.5 * x[3],
    )
}

pub fn gen_dgp3(n: usize, seed: u64) -> Result<(Dataset, GroundTruth)> {
    let mut rng = rng_from(seed);
    let mut x = DMatrix::zeros(n, 4);
    let (mut y, mut d, mut m0) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for i in 0..n {
        let r: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        for (j, v) in r.iter().enumerate() {
            x[(i, j)] = *v;
        }
        let m = dgp3_propensity(r);
        let di = (rng.random::<f64>() < m) as u8 as f64;
        let yi = (rng.random::<f64>() < dgp3_outcome_mean(r, di)) as u8 as f64;
        y.push(yi);
        d.push(di);
        m0.push(m);
    }
    finish(y, d, x, m0, DGP3_ATE)
}

/// CDF of Beta(2, 4).
pub fn beta24_cdf(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    1.0 - (1.0 - t).powi(4) * (1.0 + 4.0 * t)
}

pub fn dgp4_propensity(alpha: f64, x1: f64, x2: f64) -> f64 {
    alpha * (1.0 + beta24_cdf(x1.min(x2)))
}

pub fn dgp4_baseline(x: &[f64]) -> f64 {
    (PI * x[0] * x[1]).sin() + 2.0 * (x[2] - 0.5).powi(2) + x[3] + 0.5 * x[4]
}

pub fn gen_dgp4(n: usize, alpha: f64, seed: u64) -> Result<(Dataset, GroundTruth)> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::InvalidConfig(format!(
            "alpha = {alpha} not in (0, 0.5]"
        )));
    }
    let mut rng = rng_from(seed);
    let mut x = DMatrix::zeros(n, 20);
    let (mut y, mut d, mut m0) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for i in 0..n {
        let r: [f64; 20] = std::array::from_fn(|_| rng.random::<f64>());
        for (j, v) in r.iter().enumerate() {
            x[(i, j)] = *v;
        }
        let m = dgp4_propensity(alpha, r[0], r[1]);
        let di = (rng.random::<f64>() < m) as u8 as f64;
        let noise: f64 = rng.sample(StandardNormal);
        y.push(dgp4_baseline(&r) + (di - 0.5) * (r[0] + r[1]) + noise);
        d.push(di);
        m0.push(m);
    }
    finish(y, d, x, m0, 1.0)
}
