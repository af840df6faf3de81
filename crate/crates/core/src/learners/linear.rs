use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const JITTER: f64 = 1e-10;

/// Ordinary least squares with intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    intercept: f64,
    slopes: Vec<f64>,
}

impl LinearModel {
    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let mut out = vec![self.intercept; x.nrows()];
        for (j, b) in self.slopes.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(x.column(j).iter()) {
                *o += b * v;
            }
        }
        out
    }
}

/// Solves the centred normal equations with a `1e-10` ridge on the diagonal.
pub fn fit_linear(x: &DMatrix<f64>, y: &[f64]) -> Result<LinearModel> {
    let (n, p) = (x.nrows(), x.ncols());
    if n == 0 || y.len() != n {
        return Err(Error::InvalidData(
            "linear regression needs aligned, nonempty input".into(),
        ));
    }
    let x_mean: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - x_mean[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let mut gram = xc.tr_mul(&xc);
    for j in 0..p {
        gram[(j, j)] += JITTER;
    }
    let rhs = xc.tr_mul(&yc);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Solver("normal equations are not positive definite".into()))?;
    let slopes: Vec<f64> = chol.solve(&rhs).iter().copied().collect();
    let intercept = y_mean - slopes.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearModel { intercept, slopes })
}
