//! Observed data `W = (Y, D, X)` and simulation ground truth.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Outcome, binary treatment and covariates for `n` units.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    d: Vec<f64>,
    x: DMatrix<f64>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, d: Vec<f64>, x: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset has no rows".into()));
        }
        if d.len() != n || x.nrows() != n {
            return Err(Error::InvalidData(format!(
                "inconsistent lengths: y={}, d={}, x rows={}",
                n,
                d.len(),
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidData("covariate matrix has no columns".into()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite outcome at row {i}")));
        }
        if let Some(i) = d.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidData(format!(
                "treatment at row {i} is not 0 or 1"
            )));
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite covariate at row {}",
                k % n
            )));
        }
        Ok(Self { y, d, x })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn treated_count(&self) -> usize {
        self.d.iter().filter(|&&v| v == 1.0).count()
    }

    /// Rows `idx` as a new dataset, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            y: idx.iter().map(|&i| self.y[i]).collect(),
            d: idx.iter().map(|&i| self.d[i]).collect(),
            x: self.x.select_rows(idx.iter()),
        }
    }
}

/// Quantities known only in simulation: the true propensity per row and the true ATE.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub m0: Vec<f64>,
    pub ate: f64,
}

impl GroundTruth {
    pub fn new(m0: Vec<f64>, ate: f64) -> Result<Self> {
        if let Some(i) = m0.iter().position(|&m| !(m > 0.0 && m < 1.0)) {
            return Err(Error::InvalidData(format!(
                "true propensity at row {i} is {} (must be in (0,1))",
                m0[i]
            )));
        }
        if !ate.is_finite() {
            return Err(Error::InvalidData("true ATE is not finite".into()));
        }
        Ok(Self { m0, ate })
    }
}
