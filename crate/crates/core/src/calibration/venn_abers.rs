//! Inductive Venn-Abers calibration.

use super::isotonic::{merged_points, pool, Block};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VennAbersOutput {
    pub p0: f64,
    pub p1: f64,
    pub p: f64,
}

/// Merges the pair into one probability: `p1 + p0²/2 − p1²/2`.
pub fn venn_abers_combine(p0: f64, p1: f64) -> f64 {
    p1 + 0.5 * p0 * p0 - 0.5 * p1 * p1
}

/// Calibration set presorted with ties merged, ready for per-point refits.
#[derive(Debug, Clone, PartialEq)]
pub struct VennAbersFit {
    scores: Vec<f64>,
    wy: Vec<f64>,
    w: Vec<f64>,
}

impl VennAbersFit {
    pub fn new(scores: &[f64], labels: &[f64]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::InvalidData(
                "venn-abers needs a nonempty calibration set".into(),
            ));
        }
        if scores.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: scores.len(),
                got: labels.len(),
            });
        }
        if scores.iter().any(|v| !v.is_finite()) || labels.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidData(
                "venn-abers needs finite scores and 0/1 labels".into(),
            ));
        }
        let pts = merged_points(scores, labels, &vec![1.0; scores.len()]);
        Ok(Self {
            scores: pts.iter().map(|b| b.lo).collect(),
            wy: pts.iter().map(|b| b.wy).collect(),
            w: pts.iter().map(|b| b.w).collect(),
        })
    }

    /// Isotonic value at `s` after adding the hypothetical point `(s, label)`.
    fn refit_at(&self, s: f64, label: f64) -> f64 {
        let pos = self.scores.partition_point(|&k| k < s);
        let tie = self.scores.get(pos) == Some(&s);
        let point = |i: usize| Block {
            lo: self.scores[i],
            wy: self.wy[i],
            w: self.w[i],
        };
        let extra = Block {
            lo: s,
            wy: label,
            w: 1.0,
        };
        let (blocks, owner) = if tie {
            let pts = (0..self.scores.len()).map(|i| {
                let mut b = point(i);
                if i == pos {
                    b.wy += label;
                    b.w += 1.0;
                }
                b
            });
            pool(pts, Some(pos))
        } else {
            let pts = (0..pos)
                .map(point)
                .chain(std::iter::once(extra))
                .chain((pos..self.scores.len()).map(point));
            pool(pts, Some(pos))
        };
        let b = blocks[owner];
        b.wy / b.w
    }

    pub fn predict(&self, s: f64) -> VennAbersOutput {
        let p0 = self.refit_at(s, 0.0);
        let p1 = self.refit_at(s, 1.0);
        VennAbersOutput {
            p0,
            p1,
            p: venn_abers_combine(p0, p1),
        }
    }
}

pub fn venn_abers(
    fit_scores: &[f64],
    fit_labels: &[f64],
    test_scores: &[f64],
) -> Result<Vec<VennAbersOutput>> {
    let fit = VennAbersFit::new(fit_scores, fit_labels)?;
    Ok(test_scores.iter().map(|&s| fit.predict(s)).collect())
}
