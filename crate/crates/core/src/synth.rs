//! Seeded synthetic tasks used by the experiments, the benchmark suite and
//! the tests. Every generator returns a dataset already split 60/20/20.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr_lite::standard_normal;

use crate::data::{split_dataset, Dataset, TaskKind};
use crate::error::Result;
use crate::seed;

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.6, 0.2, 0.2);

mod rand_distr_lite {
    use rand::Rng;

    /// Box–Muller draw.
    pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

fn uniform_features(n: usize, d: usize, rng: &mut seed::Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.gen::<f64>() * 2.0 - 1.0)
}

/// Smooth nonlinear regression target plus Gaussian noise.
pub fn regression_task(n: usize, d: usize, noise: f64, seed_: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed::derive_str(seed_, "regression"));
    let x = uniform_features(n, d, &mut rng);
    let w: Vec<f64> = (0..d).map(|j| 1.0 / (1.0 + j as f64)).collect();
    let y: Vec<f64> = x
        .outer_iter()
        .map(|r| {
            let lin: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
            lin + (2.0 * r[0]).sin() + 0.5 * r[d.min(2) - 1] * r[0] + noise * standard_normal(&mut rng)
        })
        .collect();
    let ds = Dataset::new(x, y, TaskKind::Regression)?;
    split_dataset(&ds, DEFAULT_FRACTIONS, seed_)
}

/// Linear target with mild noise: linear learners dominate the pool.
pub fn linear_task(n: usize, d: usize, noise: f64, seed_: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed::derive_str(seed_, "linear"));
    let x = uniform_features(n, d, &mut rng);
    let w: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
    let y: Vec<f64> = x
        .outer_iter()
        .map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + noise * standard_normal(&mut rng))
        .collect();
    let ds = Dataset::new(x, y, TaskKind::Regression)?;
    split_dataset(&ds, DEFAULT_FRACTIONS, seed_)
}

/// Classes from the argmax of noisy random linear scores.
pub fn classification_task(n: usize, d: usize, k: usize, noise: f64, seed_: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed::derive_str(seed_, "classification"));
    let x = uniform_features(n, d, &mut rng);
    let w = Array2::from_shape_fn((d, k), |_| standard_normal(&mut rng));
    let y: Vec<f64> = x
        .outer_iter()
        .map(|r| {
            let mut best = 0;
            let mut best_s = f64::NEG_INFINITY;
            for c in 0..k {
                let s: f64 = r.iter().zip(w.column(c)).map(|(a, b)| a * b).sum::<f64>()
                    + 0.3 * (3.0 * r[c % d]).sin()
                    + noise * standard_normal(&mut rng);
                if s > best_s {
                    best_s = s;
                    best = c;
                }
            }
            best as f64
        })
        .collect();
    let ds = Dataset::new(x, y, TaskKind::classification(k)?)?;
    split_dataset(&ds, DEFAULT_FRACTIONS, seed_)
}

/// Regression target driven mostly by the first feature, so learners that
/// model it linearly dominate the pool.
pub fn dominating_feature_task(n: usize, d: usize, noise: f64, seed_: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed::derive_str(seed_, "dominating"));
    let d = d.max(2);
    let x = uniform_features(n, d, &mut rng);
    let y: Vec<f64> = x
        .outer_iter()
        .map(|r| {
            let rest: f64 = r.iter().skip(1).map(|v| (2.0 * v).sin()).sum::<f64>() / (d - 1) as f64;
            3.0 * r[0] + 0.3 * rest + noise * standard_normal(&mut rng)
        })
        .collect();
    let ds = Dataset::new(x, y, TaskKind::Regression)?;
    split_dataset(&ds, DEFAULT_FRACTIONS, seed_)
}

/// Regression task whose first feature equals the label.
pub fn label_feature_task(n: usize, d: usize, seed_: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed::derive_str(seed_, "label-feature"));
    let mut x = uniform_features(n, d.max(1), &mut rng);
    let y: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
    for (i, &v) in y.iter().enumerate() {
        x[[i, 0]] = v;
    }
    let ds = Dataset::new(x, y, TaskKind::Regression)?;
    split_dataset(&ds, DEFAULT_FRACTIONS, seed_)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_seeded() {
        let a = regression_task(50, 3, 0.2, 1).unwrap();
        let b = regression_task(50, 3, 0.2, 1).unwrap();
        assert_eq!(a.labels(), b.labels());
        assert_eq!(a.split(), b.split());
        let c = classification_task(90, 3, 3, 0.3, 2).unwrap();
        assert_eq!(c.kind(), TaskKind::Classification { num_classes: 3 });
        let t = label_feature_task(30, 2, 0).unwrap();
        assert_eq!(t.features().column(0).to_vec(), t.labels().to_vec());
        let l = linear_task(40, 2, 0.0, 4).unwrap();
        let dom = dominating_feature_task(40, 1, 0.1, 4).unwrap();
        assert_eq!(dom.n_features(), 2);
        assert_eq!(l.n_samples(), 40);
    }
}
