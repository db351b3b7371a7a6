//! Exact-split regression trees over multi-output targets.
//!
//! Classification trees are fit on one-hot targets, so the squared-error
//! criterion is the summed per-class variance and leaf means are class
//! frequencies.

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` means all of them.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

pub fn mean_leaf(targets: &Array2<f64>) -> impl Fn(&[usize]) -> Vec<f64> + '_ {
    move |rows: &[usize]| {
        let m = targets.ncols();
        let mut v = vec![0.0; m];
        for &r in rows {
            for (k, acc) in v.iter_mut().enumerate() {
                *acc += targets[[r, k]];
            }
        }
        let n = rows.len().max(1) as f64;
        v.iter_mut().for_each(|a| *a /= n);
        v
    }
}

/// Row order of every feature column, ties broken by row index. Shared by
/// all trees grown on the same matrix.
#[derive(Debug, Clone)]
pub struct Presorted {
    order: Vec<Vec<usize>>,
}

impl Presorted {
    pub fn new(x: &Array2<f64>) -> Self {
        let order = (0..x.ncols())
            .map(|f| {
                let mut o: Vec<usize> = (0..x.nrows()).collect();
                o.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
                o
            })
            .collect();
        Presorted { order }
    }
}

struct Builder<'a> {
    x: &'a Array2<f64>,
    presorted: &'a Presorted,
    count: Vec<u32>,
    targets: &'a Array2<f64>,
    params: TreeParams,
    leaf_value: &'a dyn Fn(&[usize]) -> Vec<f64>,
    nodes: Vec<Node>,
    // scratch
    order: Vec<usize>,
    left_sum: Vec<f64>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    sse: f64,
}

/// Grows a tree on `rows` of `x` against `targets` (one row per sample).
/// Splits minimize the summed squared error of the children; leaf values
/// come from `leaf_value` applied to the rows reaching the leaf.
pub fn build(
    x: &Array2<f64>,
    targets: &Array2<f64>,
    rows: &[usize],
    params: TreeParams,
    rng: &mut Rng,
    leaf_value: &dyn Fn(&[usize]) -> Vec<f64>,
) -> Tree {
    build_presorted(x, &Presorted::new(x), targets, rows, params, rng, leaf_value)
}

/// [`build`] with a precomputed column order for `x`.
pub fn build_presorted(
    x: &Array2<f64>,
    presorted: &Presorted,
    targets: &Array2<f64>,
    rows: &[usize],
    params: TreeParams,
    rng: &mut Rng,
    leaf_value: &dyn Fn(&[usize]) -> Vec<f64>,
) -> Tree {
    let mut b = Builder {
        x,
        presorted,
        count: vec![0; x.nrows()],
        targets,
        params,
        leaf_value,
        nodes: Vec::new(),
        order: Vec::with_capacity(rows.len()),
        left_sum: vec![0.0; targets.ncols()],
    };
    let mut rows = rows.to_vec();
    b.grow(&mut rows, 0, rng);
    Tree { nodes: b.nodes }
}

impl Builder<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize, rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: Vec::new() });
        let split = if depth < self.params.max_depth && rows.len() >= 2 * self.params.min_leaf.max(1)
        {
            self.best_split(rows, rng)
        } else {
            None
        };
        match split {
            None => {
                self.nodes[id] = Node::Leaf {
                    value: (self.leaf_value)(rows),
                };
            }
            Some(s) => {
                let x = self.x;
                let mut mid = 0;
                for i in 0..rows.len() {
                    if x[[rows[i], s.feature]] <= s.threshold {
                        rows.swap(i, mid);
                        mid += 1;
                    }
                }
                let (l, r) = rows.split_at_mut(mid);
                let left = self.grow(l, depth + 1, rng);
                let right = self.grow(r, depth + 1, rng);
                self.nodes[id] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right,
                };
            }
        }
        id
    }

    fn best_split(&mut self, rows: &[usize], rng: &mut Rng) -> Option<BestSplit> {
        let d = self.x.ncols();
        let m = self.targets.ncols();
        let n = rows.len();
        let mut total = vec![0.0; m];
        let mut total_sq = 0.0;
        for &r in rows {
            for k in 0..m {
                let t = self.targets[[r, k]];
                total[k] += t;
                total_sq += t * t;
            }
        }
        let parent_sse = total_sq - total.iter().map(|s| s * s).sum::<f64>() / n as f64;
        if parent_sse <= 1e-12 {
            return None;
        }

        let mut features: Vec<usize> = (0..d).collect();
        if let Some(k) = self.params.max_features {
            if k < d {
                features.shuffle(rng);
                features.truncate(k.max(1));
                features.sort_unstable();
            }
        }

        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<BestSplit> = None;
        // Large nodes walk the shared order; small ones sort their own rows.
        let scan = n * 8 >= self.x.nrows();
        if scan {
            for &r in rows {
                self.count[r] += 1;
            }
        }
        for &f in &features {
            let x = self.x;
            self.order.clear();
            if scan {
                for &r in &self.presorted.order[f] {
                    for _ in 0..self.count[r] {
                        self.order.push(r);
                    }
                }
            } else {
                self.order.extend_from_slice(rows);
                self.order
                    .sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
            }
            self.left_sum.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..n - 1 {
                let r = self.order[i];
                for k in 0..m {
                    self.left_sum[k] += self.targets[[r, k]];
                }
                let nl = i + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let xv = x[[r, f]];
                let xn = x[[self.order[i + 1], f]];
                if xv == xn {
                    continue;
                }
                // Σ(y²) is shared, so only the explained terms matter.
                let mut explained = 0.0;
                for k in 0..m {
                    let ls = self.left_sum[k];
                    let rs = total[k] - ls;
                    explained += ls * ls / nl as f64 + rs * rs / nr as f64;
                }
                let sse = total_sq - explained;
                if sse < parent_sse - 1e-12 && best.as_ref().map_or(true, |b| sse < b.sse) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: 0.5 * (xv + xn),
                        sse,
                    });
                }
            }
        }
        if scan {
            for &r in rows {
                self.count[r] = 0;
            }
        }
        best
    }
}
