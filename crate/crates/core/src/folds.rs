//! Random fold partitions and within-fold splits.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed::rng_from;

/// A balanced assignment of `n` rows to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPartition {
    assignment: Vec<usize>,
    k: usize,
}

impl FoldPartition {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Rows in fold `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    /// Rows outside fold `fold`, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Shuffles `0..n` with the seeded generator and deals rows round-robin into `k` folds.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPartition> {
    if k < 2 {
        return Err(Error::InvalidPartition(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    if n < k {
        return Err(Error::InvalidPartition(format!(
            "cannot split {n} rows into {k} nonempty folds"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from(seed));
    let mut assignment = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        assignment[row] = pos % k;
    }
    Ok(FoldPartition { assignment, k })
}

/// Splits `indices` into two disjoint parts; the first holds `round(fraction * len)` rows.
///
/// Both parts keep the relative order of `indices`.
pub fn split_within(
    indices: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if indices.len() < 2 {
        return Err(Error::InvalidSplit(format!(
            "need at least 2 indices, got {}",
            indices.len()
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "fraction {fraction} not in (0,1)"
        )));
    }
    let len = indices.len();
    let first_len = ((fraction * len as f64).round() as usize).clamp(1, len - 1);
    let mut pos: Vec<usize> = (0..len).collect();
    pos.shuffle(&mut rng_from(seed));
    let mut in_first = vec![false; len];
    for &p in &pos[..first_len] {
        in_first[p] = true;
    }
    let (mut a, mut b) = (
        Vec::with_capacity(first_len),
        Vec::with_capacity(len - first_len),
    );
    for (p, &idx) in indices.iter().enumerate() {
        if in_first[p] {
            a.push(idx);
        } else {
            b.push(idx);
        }
    }
    Ok((a, b))
}
