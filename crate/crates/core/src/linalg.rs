use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, StackError};

/// Solution of a damped least-squares problem with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// `p × m` coefficient matrix.
    pub coef: Array2<f64>,
    /// One intercept per target column.
    pub intercept: Array1<f64>,
}

impl LinearFit {
    pub fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.dot(&self.coef);
        out += &self.intercept;
        out
    }
}

/// Minimizes `‖Y − XB − 1bᵀ‖² + λ‖B‖²` by solving the centered normal
/// equations with a Cholesky factorization. If the Gram matrix is singular
/// (λ = 0 with collinear columns) a small jitter is added until it factors.
pub fn ridge(x: &Array2<f64>, y: &Array2<f64>, lambda: f64) -> Result<LinearFit> {
    let (n, p) = x.dim();
    let m = y.ncols();
    if y.nrows() != n {
        return Err(StackError::shape(format!("{n} design rows but {} targets", y.nrows())));
    }
    if n == 0 {
        return Err(StackError::invalid("least squares needs at least one row"));
    }
    if !(lambda >= 0.0) {
        return Err(StackError::invalid(format!("ridge penalty must be >= 0, got {lambda}")));
    }
    let x_mean = x.mean_axis(Axis(0)).unwrap();
    let y_mean = y.mean_axis(Axis(0)).unwrap();
    if p == 0 {
        return Ok(LinearFit {
            coef: Array2::zeros((0, m)),
            intercept: y_mean,
        });
    }
    let xc = x - &x_mean;
    let yc = y - &y_mean;
    let gram = xc.t().dot(&xc);
    let rhs = xc.t().dot(&yc);

    let g = DMatrix::from_fn(p, p, |i, j| gram[[i, j]]);
    let trace = (0..p).map(|i| gram[[i, i]]).sum::<f64>().max(1.0);
    let mut jitter = 0.0;
    let chol = loop {
        let mut a = g.clone();
        for i in 0..p {
            a[(i, i)] += lambda + jitter;
        }
        if let Some(c) = a.cholesky() {
            break c;
        }
        jitter = if jitter == 0.0 { 1e-12 * trace } else { jitter * 10.0 };
        if jitter > trace {
            return Err(StackError::invalid("normal equations could not be factored"));
        }
    };
    let mut coef = Array2::zeros((p, m));
    for k in 0..m {
        let b = DVector::from_fn(p, |i, _| rhs[[i, k]]);
        let sol = chol.solve(&b);
        for i in 0..p {
            coef[[i, k]] = sol[i];
        }
    }
    let intercept = &y_mean - &x_mean.dot(&coef);
    Ok(LinearFit { coef, intercept })
}

/// Column means and standard deviations, with zero deviations replaced by 1.
pub fn standardizer(x: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let mean = x
        .mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(x.ncols()));
    let mut scale = x.std_axis(Axis(0), 0.0);
    scale.mapv_inplace(|s| if s > 1e-12 { s } else { 1.0 });
    (mean, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exact_line() {
        let fit = ridge(&array![[1.0], [2.0]], &array![[1.0], [2.0]], 0.0).unwrap();
        let p = fit.predict(&array![[3.0]]);
        assert!((p[[0, 0]] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_still_solve() {
        let x = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let y = array![[2.0], [4.0], [6.0]];
        let fit = ridge(&x, &y, 0.0).unwrap();
        let p = fit.predict(&x);
        for i in 0..3 {
            assert!((p[[i, 0]] - y[[i, 0]]).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_target() {
        let x = array![[0.0], [5.0], [9.0]];
        let fit = ridge(&x, &array![[4.0], [4.0], [4.0]], 1.0).unwrap();
        assert!(fit.predict(&array![[100.0]])[[0, 0]] == 4.0);
    }
}
