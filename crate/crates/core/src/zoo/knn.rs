use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::linalg;

/// Inverse-distance weighted k-nearest neighbours on standardized inputs.
/// Exact matches (distance zero) take all of the weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct KnnModel {
    mean: Array1<f64>,
    scale: Array1<f64>,
    x: Array2<f64>,
    targets: Array2<f64>,
    k: usize,
}

impl KnnModel {
    pub fn fit(x: &Array2<f64>, targets: &Array2<f64>, k: usize) -> Self {
        let (mean, scale) = linalg::standardizer(x);
        let xs = (x - &mean) / &scale;
        KnnModel {
            mean,
            scale,
            x: xs,
            targets: targets.clone(),
            k: k.max(1),
        }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        let q = (x - &self.mean) / &self.scale;
        let n_train = self.x.nrows();
        let k = self.k.min(n_train);
        let m = self.targets.ncols();
        let mut out = Array2::zeros((q.nrows(), m));
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n_train);
        for (i, row) in q.outer_iter().enumerate() {
            dist.clear();
            for (j, t) in self.x.outer_iter().enumerate() {
                let d2: f64 = row.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                dist.push((d2.sqrt(), j));
            }
            dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let nearest = &mut dist[..k];
            nearest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let exact = nearest.iter().filter(|(d, _)| *d <= 1e-12).count();
            let weights: Vec<f64> = if exact > 0 {
                nearest
                    .iter()
                    .map(|(d, _)| if *d <= 1e-12 { 1.0 } else { 0.0 })
                    .collect()
            } else {
                nearest.iter().map(|(d, _)| 1.0 / d).collect()
            };
            let total: f64 = weights.iter().sum();
            for ((_, j), w) in nearest.iter().zip(&weights) {
                for c in 0..m {
                    out[[i, c]] += w / total * self.targets[[*j, c]];
                }
            }
        }
        out
    }
}
