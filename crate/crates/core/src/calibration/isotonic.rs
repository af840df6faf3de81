//! Weighted isotonic regression by pool-adjacent-violators.

use crate::error::{Error, Result};

/// Piecewise-constant non-decreasing map. Block `i` covers scores from
/// `knot_scores[i]` up to the next knot.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicFit {
    knot_scores: Vec<f64>,
    block_values: Vec<f64>,
    block_weights: Vec<f64>,
}

/// A run of pooled points: lowest score, weighted label sum, weight.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Block {
    pub lo: f64,
    pub wy: f64,
    pub w: f64,
}

impl Block {
    fn mean(&self) -> f64 {
        self.wy / self.w
    }
}

/// Sorts by score and merges tied scores into single weighted points.
pub(crate) fn merged_points(u: &[f64], d: &[f64], w: &[f64]) -> Vec<Block> {
    let mut idx: Vec<usize> = (0..u.len()).collect();
    idx.sort_by(|&a, &b| u[a].total_cmp(&u[b]));
    let mut out: Vec<Block> = Vec::with_capacity(u.len());
    for i in idx {
        match out.last_mut() {
            Some(b) if b.lo == u[i] => {
                b.wy += w[i] * d[i];
                b.w += w[i];
            }
            _ => out.push(Block {
                lo: u[i],
                wy: w[i] * d[i],
                w: w[i],
            }),
        }
    }
    out
}

/// Pools sorted points into maximal blocks. When `track` is given, also
/// returns the index of the block that absorbed that point.
pub(crate) fn pool(
    points: impl IntoIterator<Item = Block>,
    track: Option<usize>,
) -> (Vec<Block>, usize) {
    let mut stack: Vec<Block> = Vec::new();
    let mut owner = 0;
    for (i, p) in points.into_iter().enumerate() {
        stack.push(p);
        if track == Some(i) {
            owner = stack.len() - 1;
        }
        while stack.len() >= 2 {
            let last = stack[stack.len() - 1];
            let prev = stack[stack.len() - 2];
            if prev.mean() < last.mean() {
                break;
            }
            stack.pop();
            let top = stack.last_mut().unwrap();
            top.wy += last.wy;
            top.w += last.w;
            owner = owner.min(stack.len() - 1);
        }
    }
    (stack, owner)
}

pub fn pava(u: &[f64], d: &[f64], w: &[f64]) -> Result<IsotonicFit> {
    if u.is_empty() {
        return Err(Error::InvalidData(
            "isotonic regression needs at least one point".into(),
        ));
    }
    if d.len() != u.len() || w.len() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: d.len().min(w.len()),
        });
    }
    if u.iter().chain(d).any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("isotonic inputs must be finite".into()));
    }
    if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidData(
            "isotonic weights must be positive".into(),
        ));
    }
    let (blocks, _) = pool(merged_points(u, d, w), None);
    Ok(IsotonicFit {
        knot_scores: blocks.iter().map(|b| b.lo).collect(),
        block_values: blocks.iter().map(Block::mean).collect(),
        block_weights: blocks.iter().map(|b| b.w).collect(),
    })
}

/// Unit-weight convenience wrapper.
pub fn isotonic_fit(u: &[f64], d: &[f64]) -> Result<IsotonicFit> {
    pava(u, d, &vec![1.0; u.len()])
}

impl IsotonicFit {
    pub fn knot_scores(&self) -> &[f64] {
        &self.knot_scores
    }

    pub fn block_values(&self) -> &[f64] {
        &self.block_values
    }

    pub fn block_weights(&self) -> &[f64] {
        &self.block_weights
    }

    pub fn n_blocks(&self) -> usize {
        self.block_values.len()
    }

    pub fn predict(&self, s: f64) -> f64 {
        let i = self.knot_scores.partition_point(|&k| k <= s);
        self.block_values[i.saturating_sub(1)]
    }

    pub fn predict_many(&self, s: &[f64]) -> Vec<f64> {
        s.iter().map(|&v| self.predict(v)).collect()
    }
}

pub fn isotonic_predict(fit: &IsotonicFit, s: f64) -> f64 {
    fit.predict(s)
}
