use ndarray::{Array1, Array2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::linear::softmax_rows;
use super::tree::{self, Presorted, Tree, TreeParams};
use crate::seed::Rng;

/// Bagged trees with √d features per split.
pub(crate) fn fit_forest(
    x: &Array2<f64>,
    targets: &Array2<f64>,
    n_trees: usize,
    max_depth: usize,
    min_leaf: usize,
    rng: &mut Rng,
) -> Vec<Tree> {
    let n = x.nrows();
    let mtry = ((x.ncols() as f64).sqrt().ceil() as usize).max(1);
    let params = TreeParams {
        max_depth,
        min_leaf,
        max_features: Some(mtry),
    };
    let leaf = tree::mean_leaf(targets);
    let presorted = Presorted::new(x);
    (0..n_trees)
        .map(|_| {
            let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            tree::build_presorted(x, &presorted, targets, &rows, params, rng, &leaf)
        })
        .collect()
}

pub(crate) fn predict_forest(trees: &[Tree], x: &Array2<f64>, width: usize) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows(), width));
    for (i, row) in x.outer_iter().enumerate() {
        for t in trees {
            for (j, v) in t.predict_row(row).iter().enumerate() {
                out[[i, j]] += v;
            }
        }
    }
    out / trees.len().max(1) as f64
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BoostParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
}

/// Gradient boosting with exact-split trees. Regression boosts squared
/// error residuals; classification boosts one score per class under a
/// softmax, with Newton leaf values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct BoostedModel {
    init: Array1<f64>,
    learning_rate: f64,
    softmax: bool,
    /// `rounds × outputs` trees.
    trees: Vec<Vec<Tree>>,
}

impl BoostedModel {
    pub fn fit(x: &Array2<f64>, targets: &Array2<f64>, softmax: bool, p: BoostParams, rng: &mut Rng) -> Self {
        let (n, m) = targets.dim();
        let rows: Vec<usize> = (0..n).collect();
        let params = TreeParams {
            max_depth: p.max_depth,
            min_leaf: p.min_leaf,
            max_features: None,
        };
        let init: Array1<f64> = if softmax {
            targets
                .mean_axis(ndarray::Axis(0))
                .unwrap()
                .mapv(|f| f.clamp(1e-6, 1.0).ln())
        } else {
            targets.mean_axis(ndarray::Axis(0)).unwrap()
        };
        let mut scores = Array2::from_shape_fn((n, m), |(_, j)| init[j]);
        let mut trees = Vec::with_capacity(p.rounds);
        let presorted = Presorted::new(x);
        let newton_scale = if m > 1 { (m as f64 - 1.0) / m as f64 } else { 1.0 };
        for _ in 0..p.rounds {
            let fitted = if softmax {
                let mut probs = scores.clone();
                softmax_rows(&mut probs);
                let grad = targets - &probs;
                let mut round = Vec::with_capacity(m);
                for k in 0..m {
                    let col = grad.column(k).to_owned().insert_axis(ndarray::Axis(1));
                    let probs_ref = &probs;
                    let col_ref = &col;
                    let leaf = move |rs: &[usize]| {
                        let num: f64 = rs.iter().map(|&r| col_ref[[r, 0]]).sum();
                        let den: f64 = rs
                            .iter()
                            .map(|&r| {
                                let pk = probs_ref[[r, k]];
                                pk * (1.0 - pk)
                            })
                            .sum();
                        vec![newton_scale * num / den.max(1e-12)]
                    };
                    round.push(tree::build_presorted(x, &presorted, &col, &rows, params, rng, &leaf));
                }
                round
            } else {
                let resid = targets - &scores;
                let leaf = tree::mean_leaf(&resid);
                let t = tree::build_presorted(x, &presorted, &resid, &rows, params, rng, &leaf);
                vec![t]
            };
            for (i, row) in x.outer_iter().enumerate() {
                for (k, t) in fitted.iter().enumerate() {
                    let v = t.predict_row(row);
                    if softmax {
                        scores[[i, k]] += p.learning_rate * v[0];
                    } else {
                        for (j, vj) in v.iter().enumerate() {
                            scores[[i, j]] += p.learning_rate * vj;
                        }
                    }
                }
            }
            trees.push(fitted);
        }
        BoostedModel {
            init,
            learning_rate: p.learning_rate,
            softmax,
            trees,
        }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        let m = self.init.len();
        let mut scores = Array2::from_shape_fn((x.nrows(), m), |(_, j)| self.init[j]);
        for (i, row) in x.outer_iter().enumerate() {
            for round in &self.trees {
                for (k, t) in round.iter().enumerate() {
                    let v = t.predict_row(row);
                    if self.softmax {
                        scores[[i, k]] += self.learning_rate * v[0];
                    } else {
                        for (j, vj) in v.iter().enumerate() {
                            scores[[i, j]] += self.learning_rate * vj;
                        }
                    }
                }
            }
        }
        if self.softmax {
            softmax_rows(&mut scores);
        }
        scores
    }
}
