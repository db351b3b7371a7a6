use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct RidgeModel {
    coef: Array2<f64>,
    intercept: Array1<f64>,
}

impl RidgeModel {
    pub fn fit(x: &Array2<f64>, targets: &Array2<f64>, alpha: f64) -> Result<Self> {
        let fit = linalg::ridge(x, targets, alpha)?;
        Ok(RidgeModel {
            coef: fit.coef,
            intercept: fit.intercept,
        })
    }

    pub fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.dot(&self.coef);
        out += &self.intercept;
        out
    }
}

/// Multinomial logistic regression on standardized inputs, trained by
/// full-batch gradient descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct LogisticModel {
    mean: Array1<f64>,
    scale: Array1<f64>,
    weights: Array2<f64>,
    bias: Array1<f64>,
}

const LOGISTIC_STEP: f64 = 0.5;

impl LogisticModel {
    pub fn fit(x: &Array2<f64>, targets: &Array2<f64>, l2: f64, epochs: usize) -> Self {
        let (mean, scale) = linalg::standardizer(x);
        let xs = (x - &mean) / &scale;
        let n = x.nrows() as f64;
        let k = targets.ncols();
        let mut weights = Array2::<f64>::zeros((x.ncols(), k));
        let mut bias = Array1::<f64>::zeros(k);
        for _ in 0..epochs {
            let mut probs = xs.dot(&weights);
            probs += &bias;
            softmax_rows(&mut probs);
            let err = probs - targets;
            let grad_w = xs.t().dot(&err) / n + &weights * l2;
            let grad_b = err.sum_axis(Axis(0)) / n;
            weights.scaled_add(-LOGISTIC_STEP, &grad_w);
            bias.scaled_add(-LOGISTIC_STEP, &grad_b);
        }
        LogisticModel {
            mean,
            scale,
            weights,
            bias,
        }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        let xs = (x - &self.mean) / &self.scale;
        let mut out = xs.dot(&self.weights);
        out += &self.bias;
        softmax_rows(&mut out);
        out
    }
}

pub(crate) fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row /= s;
    }
}
