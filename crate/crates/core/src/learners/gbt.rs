//! Gradient-boosted regression trees for squared and logistic loss.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::logistic::{expit, logit, PROB_FLOOR};
use super::tree::{fit_tree_presorted, SortedColumns, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Squared,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    loss: Loss,
    init: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
    p: usize,
}

impl GbtModel {
    pub fn rounds(&self) -> usize {
        self.trees.len()
    }

    /// Raw additive score (log-odds for logistic loss).
    pub fn raw_scores(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let mut f = vec![self.init; x.nrows()];
        for t in &self.trees {
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += self.learning_rate * t.predict_row(x, i);
            }
        }
        f
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let f = self.raw_scores(x);
        match self.loss {
            Loss::Squared => f,
            Loss::Logistic => f.into_iter().map(expit).collect(),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }
}

/// Stagewise boosting: each round fits a tree to the negative gradient.
///
/// Squared loss uses the leaf means of the residuals. Logistic loss keeps the
/// tree structure fitted to `d - p` and replaces each leaf by the Newton step
/// `sum(d - p) / sum(p (1 - p))`.
///
/// Logistic targets must be in {0, 1}; callers handle the single-class case.
pub fn fit_gbt(x: &DMatrix<f64>, targets: &[f64], loss: Loss, params: GbtParams) -> GbtModel {
    let n = x.nrows();
    let mean = targets.iter().sum::<f64>() / n as f64;
    let init = match loss {
        Loss::Squared => mean,
        Loss::Logistic => logit(mean.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)),
    };
    let sorted = SortedColumns::new(x);
    let tree_params = TreeParams {
        max_depth: Some(params.max_depth),
        min_leaf: params.min_leaf,
        max_features: None,
    };
    let ones = vec![1.0; n];
    let mut f = vec![init; n];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut resid = vec![0.0; n];
    let mut leaf_of = vec![0usize; n];

    for _ in 0..params.rounds {
        let prob: Vec<f64> = match loss {
            Loss::Squared => Vec::new(),
            Loss::Logistic => f.iter().map(|&v| expit(v)).collect(),
        };
        for i in 0..n {
            resid[i] = match loss {
                Loss::Squared => targets[i] - f[i],
                Loss::Logistic => targets[i] - prob[i],
            };
        }
        let mut tree = fit_tree_presorted::<rand_chacha::ChaCha8Rng>(
            x,
            &sorted,
            &resid,
            &ones,
            tree_params,
            None,
        );
        if loss == Loss::Logistic {
            let mut num = vec![0.0; tree.node_count()];
            let mut den = vec![0.0; tree.node_count()];
            for i in 0..n {
                let leaf = tree.leaf_of(x, i);
                leaf_of[i] = leaf;
                num[leaf] += resid[i];
                den[leaf] += prob[i] * (1.0 - prob[i]);
            }
            let values: Vec<f64> = num
                .iter()
                .zip(&den)
                .map(|(&s, &h)| if h > 0.0 { s / h.max(1e-12) } else { 0.0 })
                .collect();
            tree.map_leaves(|id| values[id]);
            for i in 0..n {
                f[i] += params.learning_rate * values[leaf_of[i]];
            }
        } else {
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += params.learning_rate * tree.predict_row(x, i);
            }
        }
        trees.push(tree);
    }
    GbtModel {
        loss,
        init,
        learning_rate: params.learning_rate,
        trees,
        p: x.ncols(),
    }
}
