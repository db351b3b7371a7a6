//! Loss functions shared by every stage: the squared-error loss used for the
//! error covariance, dropout rates and Retain comparisons, and the task
//! metric used for reporting.

use ndarray::Array2;

use crate::data::{PredictionBlock, TaskKind};
use crate::error::{Result, StackError};

pub fn one_hot(labels: &[f64], num_classes: usize) -> Result<Array2<f64>> {
    if num_classes < 2 {
        return Err(StackError::invalid(format!(
            "one-hot encoding needs at least 2 classes, got {num_classes}"
        )));
    }
    let mut out = Array2::zeros((labels.len(), num_classes));
    for (row, &y) in labels.iter().enumerate() {
        if y.fract() != 0.0 || y < 0.0 || y >= num_classes as f64 {
            return Err(StackError::LabelOutOfRange {
                row,
                label: y.to_string(),
                num_classes,
            });
        }
        out[[row, y as usize]] = 1.0;
    }
    Ok(out)
}

/// Labels as a target matrix: one-hot for classification, a single column
/// for regression.
pub fn target_matrix(labels: &[f64], kind: TaskKind) -> Result<Array2<f64>> {
    match kind {
        TaskKind::Classification { num_classes } => one_hot(labels, num_classes),
        TaskKind::Regression => Ok(Array2::from_shape_fn((labels.len(), 1), |(i, _)| labels[i])),
    }
}

fn check_aligned(pred: &PredictionBlock, labels: &[f64], kind: TaskKind) -> Result<()> {
    if pred.rows() != labels.len() {
        return Err(StackError::shape(format!(
            "{} prediction rows but {} labels",
            pred.rows(),
            labels.len()
        )));
    }
    if pred.width() != kind.width() {
        return Err(StackError::shape(format!(
            "prediction width {} does not match task width {}",
            pred.width(),
            kind.width()
        )));
    }
    Ok(())
}

/// Residuals `target - prediction`, row-aligned with `labels`.
pub fn residuals(pred: &PredictionBlock, labels: &[f64], kind: TaskKind) -> Result<Array2<f64>> {
    check_aligned(pred, labels, kind)?;
    Ok(target_matrix(labels, kind)? - pred.values())
}

/// Mean over rows of the squared norm of `one_hot(y) - p` (classification)
/// or of `(y - ŷ)²` (regression).
pub fn squared_error_loss(pred: &PredictionBlock, labels: &[f64], kind: TaskKind) -> Result<f64> {
    let r = residuals(pred, labels, kind)?;
    if r.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(r.iter().map(|v| v * v).sum::<f64>() / r.nrows() as f64)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: ndarray::ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Misclassification rate for classification, MSE for regression.
pub fn task_metric(pred: &PredictionBlock, labels: &[f64], kind: TaskKind) -> Result<f64> {
    check_aligned(pred, labels, kind)?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    match kind {
        TaskKind::Classification { .. } => {
            let wrong = pred
                .values()
                .outer_iter()
                .zip(labels)
                .filter(|(row, &y)| argmax(row.view()) != y as usize)
                .count();
            Ok(wrong as f64 / labels.len() as f64)
        }
        TaskKind::Regression => squared_error_loss(pred, labels, kind),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn reg(v: &[f64]) -> PredictionBlock {
        PredictionBlock::from_array(Array2::from_shape_fn((v.len(), 1), |(i, _)| v[i]))
    }

    const CLS2: TaskKind = TaskKind::Classification { num_classes: 2 };

    #[test]
    fn squared_error_examples() {
        let r = TaskKind::Regression;
        assert_eq!(squared_error_loss(&reg(&[1.0, 2.0]), &[1.0, 2.0], r).unwrap(), 0.0);
        assert_eq!(squared_error_loss(&reg(&[0.0, 0.0]), &[1.0, 1.0], r).unwrap(), 1.0);
        let p = PredictionBlock::from_array(array![[1.0, 0.0], [0.5, 0.5]]);
        // Row losses: 0 and 0.25 + 0.25.
        assert_eq!(squared_error_loss(&p, &[0.0, 0.0], CLS2).unwrap(), 0.25);
        assert!(squared_error_loss(&reg(&[1.0]), &[1.0, 2.0], r).is_err());
    }

    #[test]
    fn task_metric_examples() {
        let p = PredictionBlock::from_array(array![[0.9, 0.1], [0.2, 0.8], [0.6, 0.4], [0.3, 0.7]]);
        assert_eq!(task_metric(&p, &[0.0, 1.0, 0.0, 1.0], CLS2).unwrap(), 0.0);
        assert_eq!(task_metric(&p, &[0.0, 1.0, 1.0, 1.0], CLS2).unwrap(), 0.25);
        assert_eq!(task_metric(&reg(&[1.5]), &[1.0], TaskKind::Regression).unwrap(), 0.25);
        // Tie decodes to class 0.
        let tie = PredictionBlock::from_array(array![[0.5, 0.5]]);
        assert_eq!(task_metric(&tie, &[0.0], CLS2).unwrap(), 0.0);
    }

    #[test]
    fn one_hot_examples() {
        assert_eq!(one_hot(&[0.0, 1.0], 2).unwrap(), array![[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(one_hot(&[2.0], 3).unwrap(), array![[0.0, 0.0, 1.0]]);
        assert!(one_hot(&[1.0], 1).is_err());
        assert!(one_hot(&[3.0], 3).is_err());
    }

    proptest::proptest! {
        #[test]
        fn losses_are_bounded(ps in proptest::collection::vec(0.0f64..1.0, 1..30), seed in 0u64..50) {
            let n = ps.len();
            let vals = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { ps[i] } else { 1.0 - ps[i] });
            let labels: Vec<f64> = (0..n).map(|i| ((i as u64 + seed) % 2) as f64).collect();
            let p = PredictionBlock::from_array(vals);
            let l = squared_error_loss(&p, &labels, CLS2).unwrap();
            let m = task_metric(&p, &labels, CLS2).unwrap();
            proptest::prop_assert!(l >= 0.0);
            proptest::prop_assert!((0.0..=1.0).contains(&m));
            let exact = PredictionBlock::from_array(one_hot(&labels, 2).unwrap());
            proptest::prop_assert_eq!(squared_error_loss(&exact, &labels, CLS2).unwrap(), 0.0);
        }
    }
}
