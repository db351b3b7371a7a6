use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::space::{SearchSpace, ENCODED_DIMS};
use super::Observation;
use crate::error::{Result, StackError};
use crate::seed;
use crate::stack::EnsembleConfig;
use crate::zoo::tree::{self, Tree, TreeParams};

pub const SURROGATE_TREES: usize = 10;
pub const SURROGATE_MIN_LEAF: usize = 2;

/// Random forest over encoded configurations; the spread of per-tree
/// predictions is the predictive variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateForest {
    pub space: SearchSpace,
    pub trees: Vec<Tree>,
}

/// Mean of the targets, exact when they are all equal.
fn stable_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = values.clone();
    let first = it.next().unwrap_or(0.0);
    if it.all(|v| v == first) {
        return first;
    }
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

pub fn fit_surrogate(space: &SearchSpace, observations: &[Observation], seed_: u64) -> Result<SurrogateForest> {
    if observations.len() < 2 {
        return Err(StackError::invalid(format!(
            "the surrogate needs at least 2 observations, got {}",
            observations.len()
        )));
    }
    let n = observations.len();
    let x = Array2::from_shape_fn((n, ENCODED_DIMS), |(i, j)| space.encode(&observations[i].config)[j]);
    let y = Array2::from_shape_fn((n, 1), |(i, _)| observations[i].val_loss);
    let leaf = |rows: &[usize]| vec![stable_mean(rows.iter().map(|&r| y[[r, 0]]))];
    let params = TreeParams {
        max_depth: 32,
        min_leaf: SURROGATE_MIN_LEAF,
        max_features: None,
    };
    let mut rng = seed::rng(seed::derive_str(seed_, "surrogate"));
    let trees = (0..SURROGATE_TREES)
        .map(|_| {
            let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            tree::build(&x, &y, &rows, params, &mut rng, &leaf)
        })
        .collect();
    Ok(SurrogateForest {
        space: space.clone(),
        trees,
    })
}

impl SurrogateForest {
    /// `(mean, variance)` of the per-tree predictions.
    pub fn predict(&self, config: &EnsembleConfig) -> (f64, f64) {
        let e = self.space.encode(config);
        let row = ndarray::ArrayView1::from(&e[..]);
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict_row(row)[0]).collect();
        let mean = stable_mean(preds.iter().copied());
        if preds.iter().all(|&p| p == preds[0]) {
            return (mean, 0.0);
        }
        let var = preds.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / preds.len() as f64;
        (mean, var)
    }
}

/// Expected improvement below `best` for a normal predictive distribution.
pub fn expected_improvement_at(mean: f64, std: f64, best: f64) -> f64 {
    if !(std > 0.0) {
        return (best - mean).max(0.0);
    }
    let normal = Normal::standard();
    let z = (best - mean) / std;
    ((best - mean) * normal.cdf(z) + std * normal.pdf(z)).max(0.0)
}

pub fn expected_improvement(surrogate: &SurrogateForest, config: &EnsembleConfig, best_loss: f64) -> f64 {
    let (mean, var) = surrogate.predict(config);
    expected_improvement_at(mean, var.sqrt(), best_loss)
}
