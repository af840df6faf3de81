use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_presorted, SortedColumns, Tree, TreeParams};
use crate::seed::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfParams {
    pub trees: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Share of features tried at each split; `None` picks the task default.
    pub feature_fraction: Option<f64>,
    pub bootstrap: bool,
}

impl Default for RfParams {
    fn default() -> Self {
        Self {
            trees: 200,
            min_leaf: 5,
            max_depth: None,
            feature_fraction: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<Tree>,
    p: usize,
}

impl ForestModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let mut out = vec![0.0; x.nrows()];
        for t in &self.trees {
            for (i, o) in out.iter_mut().enumerate() {
                *o += t.predict_row(x, i);
            }
        }
        let k = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= k);
        out
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn p(&self) -> usize {
        self.p
    }
}

/// Bagged CART trees with per-split feature subsampling.
///
/// For 0/1 targets every leaf mean is a class fraction, so the averaged
/// prediction is a probability. `default_fraction` is used when the params
/// leave the feature share open.
pub fn fit_rf(
    x: &DMatrix<f64>,
    targets: &[f64],
    params: RfParams,
    default_fraction: f64,
    seed: u64,
) -> ForestModel {
    let (n, p) = (x.nrows(), x.ncols());
    let fraction = params.feature_fraction.unwrap_or(default_fraction);
    let max_features = ((fraction * p as f64).round() as usize).clamp(1, p);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        max_features: Some(max_features),
    };
    let sorted = SortedColumns::new(x);
    let mut rng = rng_from(seed);
    let mut weights = vec![0.0; n];
    let trees = (0..params.trees.max(1))
        .map(|_| {
            if params.bootstrap {
                weights.iter_mut().for_each(|w| *w = 0.0);
                for _ in 0..n {
                    weights[rng.random_range(0..n)] += 1.0;
                }
            } else {
                weights.iter_mut().for_each(|w| *w = 1.0);
            }
            fit_tree_presorted(x, &sorted, targets, &weights, tree_params, Some(&mut rng))
        })
        .collect();
    ForestModel { trees, p }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::tree::fit_tree;

    fn toy() -> (DMatrix<f64>, Vec<f64>) {
        let x = DMatrix::from_fn(60, 3, |i, j| ((i * (j + 2) * 7) % 23) as f64);
        let d = (0..60)
            .map(|i| (x[(i, 0)] + x[(i, 2)] > 22.0) as u8 as f64)
            .collect();
        (x, d)
    }

    #[test]
    fn single_full_tree_reduces_to_cart() {
        let (x, d) = toy();
        let params = RfParams {
            trees: 1,
            min_leaf: 2,
            max_depth: Some(4),
            feature_fraction: Some(1.0),
            bootstrap: false,
        };
        let rf = fit_rf(&x, &d, params, 1.0, 3);
        let tree = fit_tree(&x, &d, &vec![1.0; 60], 4, 2);
        assert_eq!(rf.predict(&x), tree.predict(&x));
    }

    #[test]
    fn probabilities_in_unit_interval() {
        let (x, d) = toy();
        let rf = fit_rf(
            &x,
            &d,
            RfParams {
                trees: 25,
                ..Default::default()
            },
            (3f64).sqrt() / 3.0,
            9,
        );
        assert!(rf.predict(&x).iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn constant_targets() {
        let (x, _) = toy();
        let rf = fit_rf(
            &x,
            &[0.7; 60],
            RfParams {
                trees: 10,
                ..Default::default()
            },
            1.0 / 3.0,
            1,
        );
        assert!(rf.predict(&x).iter().all(|p| (p - 0.7).abs() < 1e-12));
    }

    #[test]
    fn seeded_fits_are_reproducible() {
        let (x, d) = toy();
        let a = fit_rf(
            &x,
            &d,
            RfParams {
                trees: 10,
                ..Default::default()
            },
            0.5,
            4,
        );
        let b = fit_rf(
            &x,
            &d,
            RfParams {
                trees: 10,
                ..Default::default()
            },
            0.5,
            4,
        );
        assert_eq!(a, b);
    }
}
