//! L2-penalized logistic regression fitted by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const PROB_FLOOR: f64 = 1e-12;

pub fn expit(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogitParams {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogitParams {
    fn default() -> Self {
        Self {
            l2: 1e-6,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

/// Intercept first, then one slope per column.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    coef: Vec<f64>,
    iterations: usize,
    objective_trace: Vec<f64>,
}

impl LogisticModel {
    pub fn intercept(&self) -> f64 {
        self.coef[0]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.coef[1..]
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Penalized log-likelihood after each accepted IRLS step (first entry: start value).
    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    pub fn p(&self) -> usize {
        self.coef.len() - 1
    }

    pub fn linear_predictor(&self, x: &DMatrix<f64>, i: usize) -> f64 {
        self.coef[0]
            + self.coef[1..]
                .iter()
                .enumerate()
                .map(|(j, b)| b * x[(i, j)])
                .sum::<f64>()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| expit(self.linear_predictor(x, i)))
            .collect()
    }
}

fn eta(x: &DMatrix<f64>, beta: &[f64]) -> Vec<f64> {
    let mut out = vec![beta[0]; x.nrows()];
    for j in 0..x.ncols() {
        let b = beta[j + 1];
        if b != 0.0 {
            for (o, v) in out.iter_mut().zip(x.column(j).iter()) {
                *o += b * v;
            }
        }
    }
    out
}

/// Penalized log-likelihood `sum(d log p + (1-d) log(1-p)) - l2/2 * |slopes|^2` and its gradient.
pub fn logistic_objective(x: &DMatrix<f64>, d: &[f64], beta: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let e = eta(x, beta);
    let mut value = 0.0;
    let mut grad = vec![0.0; beta.len()];
    for (i, &ei) in e.iter().enumerate() {
        // log p = -softplus(-eta), log(1-p) = -softplus(eta)
        value -= if d[i] == 1.0 {
            softplus(-ei)
        } else {
            softplus(ei)
        };
        let r = d[i] - expit(ei);
        grad[0] += r;
        for j in 0..x.ncols() {
            grad[j + 1] += r * x[(i, j)];
        }
    }
    for j in 1..beta.len() {
        value -= 0.5 * l2 * beta[j] * beta[j];
        grad[j] -= l2 * beta[j];
    }
    (value, grad)
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Maximizes the penalized Bernoulli log-likelihood with an unpenalized intercept.
///
/// Each Newton step is halved until the objective does not decrease, so the
/// recorded trace is non-decreasing.
pub fn fit_logistic(x: &DMatrix<f64>, d: &[f64], params: LogitParams) -> Result<LogisticModel> {
    let (n, p) = (x.nrows(), x.ncols());
    if n == 0 || d.len() != n {
        return Err(Error::InvalidData(
            "logistic regression needs aligned, nonempty input".into(),
        ));
    }
    if params.l2 < 0.0 {
        return Err(Error::InvalidConfig(
            "l2 penalty must be non-negative".into(),
        ));
    }
    let k = p + 1;
    let mean = d.iter().sum::<f64>() / n as f64;
    let mut beta = vec![0.0; k];
    beta[0] = logit(mean.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR));
    let (mut obj, mut grad) = logistic_objective(x, d, &beta, params.l2);
    let mut trace = vec![obj];
    let mut iterations = 0;

    for _ in 0..params.max_iter {
        iterations += 1;
        let e = eta(x, &beta);
        let w: Vec<f64> = e
            .iter()
            .map(|&v| {
                let m = expit(v);
                m * (1.0 - m)
            })
            .collect();
        let mut h = DMatrix::<f64>::zeros(k, k);
        h[(0, 0)] = w.iter().sum();
        for a in 0..p {
            let ca = x.column(a);
            let s: f64 = ca.iter().zip(&w).map(|(v, wi)| v * wi).sum();
            h[(0, a + 1)] = s;
            h[(a + 1, 0)] = s;
            for b in a..p {
                let cb = x.column(b);
                let s: f64 = ca
                    .iter()
                    .zip(cb.iter())
                    .zip(&w)
                    .map(|((u, v), wi)| u * v * wi)
                    .sum();
                h[(a + 1, b + 1)] = s;
                h[(b + 1, a + 1)] = s;
            }
            h[(a + 1, a + 1)] += params.l2;
        }
        let scale = h.diagonal().max();
        let chol = h.cholesky().ok_or(Error::Separation)?;
        if chol
            .l_dirty()
            .diagonal()
            .iter()
            .any(|&v| v * v <= 1e-12 * scale)
        {
            return Err(Error::Separation);
        }
        let delta = chol.solve(&DVector::from_vec(grad.clone()));

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = beta
                .iter()
                .zip(delta.iter())
                .map(|(b, s)| b + step * s)
                .collect();
            let (cobj, cgrad) = logistic_objective(x, d, &cand, params.l2);
            if cobj.is_finite() && cobj >= obj {
                accepted = Some((cand, cobj, cgrad));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cobj, cgrad)) = accepted else {
            break;
        };
        let max_change = beta
            .iter()
            .zip(&cand)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        beta = cand;
        obj = cobj;
        grad = cgrad;
        trace.push(obj);
        if max_change < params.tol {
            break;
        }
    }
    Ok(LogisticModel {
        coef: beta,
        iterations,
        objective_trace: trace,
    })
}
