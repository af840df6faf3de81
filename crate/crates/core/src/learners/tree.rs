//! Greedy CART regression trees on weighted squared error.
//!
//! Columns are presorted once per design matrix ([`SortedColumns`]) and every
//! node keeps one sorted row list per feature, so a split scan is linear in the
//! node size. Candidate thresholds are midpoints between consecutive distinct
//! values; the first best candidate wins, i.e. ties go to the lowest feature
//! index and then the lowest threshold.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;

/// Rows of a design matrix sorted by each column (ties broken by row index).
#[derive(Debug, Clone)]
pub struct SortedColumns {
    order: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let n = x.nrows();
        let order = (0..x.ncols())
            .map(|j| {
                let col = x.column(j);
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { order }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    /// `None` grows until `min_leaf` or purity stops it.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features drawn per split; `None` means all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    p: usize,
}

impl Tree {
    pub(crate) fn constant(value: f64, p: usize) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
            p,
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Feature and threshold of the root split, if the tree has one.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Index of the leaf node reached by row `i` of `x`.
    pub(crate) fn leaf_of(&self, x: &DMatrix<f64>, i: usize) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if x[(i, feature)] <= threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub(crate) fn predict_row(&self, x: &DMatrix<f64>, i: usize) -> f64 {
        match self.nodes[self.leaf_of(x, i)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows()).map(|i| self.predict_row(x, i)).collect()
    }

    /// Replaces every leaf value by `f(leaf_id)`.
    pub(crate) fn map_leaves(&mut self, mut f: impl FnMut(usize) -> f64) {
        for (id, node) in self.nodes.iter_mut().enumerate() {
            if let Node::Leaf { value } = node {
                *value = f(id);
            }
        }
    }

    pub(crate) fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

struct Builder<'a, R> {
    x: &'a DMatrix<f64>,
    targets: &'a [f64],
    weights: &'a [f64],
    params: TreeParams,
    rng: Option<&'a mut R>,
    go_left: Vec<bool>,
    nodes: Vec<Node>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, lists: Vec<Vec<u32>>, depth: usize) -> usize {
        let rows = &lists[0];
        let (mut w, mut s, mut q) = (0.0, 0.0, 0.0);
        for &r in rows {
            let (wi, ti) = (self.weights[r as usize], self.targets[r as usize]);
            w += wi;
            s += wi * ti;
            q += wi * ti * ti;
        }
        let id = self.nodes.len();
        let value = if w > 0.0 { s / w } else { 0.0 };
        self.nodes.push(Node::Leaf { value });

        let sse = q - s * s / w;
        let depth_ok = self.params.max_depth.is_none_or(|m| depth < m);
        if !depth_ok || rows.len() < 2 * self.params.min_leaf || !(sse > 1e-12 * q.max(1e-300)) {
            return id;
        }

        let Some(best) = self.best_split(&lists, w, s) else {
            return id;
        };
        if !(best.gain > 1e-10 * sse) {
            return id;
        }

        let col = self.x.column(best.feature);
        for &r in rows {
            self.go_left[r as usize] = col[r as usize] <= best.threshold;
        }
        let mut left_lists = Vec::with_capacity(lists.len());
        let mut right_lists = Vec::with_capacity(lists.len());
        for list in &lists {
            let (l, r): (Vec<u32>, Vec<u32>) =
                list.iter().partition(|&&r| self.go_left[r as usize]);
            left_lists.push(l);
            right_lists.push(r);
        }
        drop(lists);
        let left = self.grow(left_lists, depth + 1);
        let right = self.grow(right_lists, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.ncols();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < p => {
                let mut f = sample(rng, p, k.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, lists: &[Vec<u32>], w: f64, s: f64) -> Option<BestSplit> {
        let min_leaf = self.params.min_leaf.max(1);
        let base = s * s / w;
        let mut best: Option<BestSplit> = None;
        for f in self.candidate_features() {
            let list = &lists[f];
            let col = self.x.column(f);
            let count = list.len();
            let (mut wl, mut sl) = (0.0, 0.0);
            for pos in 0..count - 1 {
                let r = list[pos] as usize;
                wl += self.weights[r];
                sl += self.weights[r] * self.targets[r];
                let left_n = pos + 1;
                if left_n < min_leaf {
                    continue;
                }
                if count - left_n < min_leaf {
                    break;
                }
                let (a, b) = (col[r], col[list[pos + 1] as usize]);
                if a == b {
                    continue;
                }
                let wr = w - wl;
                if wl <= 0.0 || wr <= 0.0 {
                    continue;
                }
                let sr = s - sl;
                let gain = sl * sl / wl + sr * sr / wr - base;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = 0.5 * (a + b);
                    let threshold = if mid < b { mid } else { a };
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }
}

/// Fits a tree on rows with positive weight. With `rng = None` every split scans all features.
pub fn fit_tree_presorted<R: Rng>(
    x: &DMatrix<f64>,
    sorted: &SortedColumns,
    targets: &[f64],
    weights: &[f64],
    params: TreeParams,
    rng: Option<&mut R>,
) -> Tree {
    let lists: Vec<Vec<u32>> = sorted
        .order
        .iter()
        .map(|o| {
            o.iter()
                .copied()
                .filter(|&r| weights[r as usize] > 0.0)
                .collect()
        })
        .collect();
    if lists.first().is_none_or(|l| l.is_empty()) {
        return Tree::constant(0.0, x.ncols());
    }
    let mut b = Builder {
        x,
        targets,
        weights,
        params,
        rng,
        go_left: vec![false; x.nrows()],
        nodes: Vec::new(),
    };
    b.grow(lists, 0);
    Tree {
        nodes: b.nodes,
        p: x.ncols(),
    }
}

/// Greedy CART fit minimizing weighted squared error; leaves predict weighted means.
pub fn fit_tree(
    x: &DMatrix<f64>,
    targets: &[f64],
    weights: &[f64],
    max_depth: usize,
    min_leaf: usize,
) -> Tree {
    let sorted = SortedColumns::new(x);
    let params = TreeParams {
        max_depth: Some(max_depth),
        min_leaf,
        max_features: None,
    };
    fit_tree_presorted::<rand_chacha::ChaCha8Rng>(x, &sorted, targets, weights, params, None)
}
