use rand::Rng as _;

use crate::data::{PredictionBlock, TaskKind};
use crate::error::{Result, StackError};
use crate::loss::squared_error_loss;
use crate::seed::Rng;

pub const MAX_DROPOUT_RATE: f64 = 0.4;

/// Per-feature drop probabilities `(ℒ_min / ℒ_i)·γ₀` from each incoming
/// feature's train loss. When the best loss is exactly zero, zero-loss
/// features get `γ₀` and every other feature gets 0.
pub fn compute_dropout_rates(
    prev_train_preds: &[&PredictionBlock],
    train_labels: &[f64],
    kind: TaskKind,
    gamma0: f64,
) -> Result<Vec<f64>> {
    if !(0.0..=MAX_DROPOUT_RATE).contains(&gamma0) {
        return Err(StackError::invalid(format!(
            "dropout rate {gamma0} outside [0, {MAX_DROPOUT_RATE}]"
        )));
    }
    if prev_train_preds.is_empty() {
        return Err(StackError::invalid("dropout rates need at least one feature"));
    }
    let losses = prev_train_preds
        .iter()
        .map(|p| squared_error_loss(p, train_labels, kind))
        .collect::<Result<Vec<f64>>>()?;
    Ok(rates_from_losses(&losses, gamma0))
}

pub fn rates_from_losses(losses: &[f64], gamma0: f64) -> Vec<f64> {
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    losses
        .iter()
        .map(|&l| {
            if min == 0.0 {
                if l == 0.0 {
                    gamma0
                } else {
                    0.0
                }
            } else if l == min {
                gamma0
            } else {
                (min / l) * gamma0
            }
        })
        .collect()
}

/// Independent Bernoulli draws; `true` marks a dropped feature. If every
/// feature is dropped, the lowest-index minimum-rate feature is kept.
pub fn sample_mask(rates: &[f64], rng: &mut Rng) -> Vec<bool> {
    let mut dropped: Vec<bool> = rates.iter().map(|&r| rng.gen::<f64>() < r).collect();
    if !rates.is_empty() && dropped.iter().all(|&d| d) {
        let mut keep = 0;
        for (i, &r) in rates.iter().enumerate() {
            if r < rates[keep] {
                keep = i;
            }
        }
        dropped[keep] = false;
    }
    dropped
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::Array2;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn rate_examples() {
        assert!(close(&rates_from_losses(&[0.1, 0.2, 0.4], 0.4), &[0.4, 0.2, 0.1]));
        assert!(close(&rates_from_losses(&[0.1, 0.2], 0.0), &[0.0, 0.0]));
        assert!(close(&rates_from_losses(&[0.3, 0.3], 0.2), &[0.2, 0.2]));
        assert!(close(&rates_from_losses(&[0.0, 0.5, 0.0], 0.3), &[0.3, 0.0, 0.3]));
    }

    #[test]
    fn rates_from_prediction_blocks() {
        let y = [0.0, 1.0];
        let exact = PredictionBlock::from_array(Array2::from_shape_vec((2, 1), vec![0.0, 1.0]).unwrap());
        let off = PredictionBlock::from_array(Array2::from_shape_vec((2, 1), vec![1.0, 0.0]).unwrap());
        let r = compute_dropout_rates(&[&off, &exact], &y, TaskKind::Regression, 0.4).unwrap();
        assert_eq!(r, vec![0.0, 0.4]);
        assert!(compute_dropout_rates(&[&off], &y, TaskKind::Regression, 0.5).is_err());
        assert!(compute_dropout_rates(&[], &y, TaskKind::Regression, 0.1).is_err());
    }

    #[test]
    fn mask_examples() {
        let mut rng = seed::rng(0);
        assert_eq!(sample_mask(&[0.0; 4], &mut rng), vec![false; 4]);
        assert_eq!(sample_mask(&[1.0; 4], &mut rng), vec![false, true, true, true]);
        assert_eq!(sample_mask(&[1.0, 1.0, 1.0], &mut rng), vec![false, true, true]);
    }

    #[test]
    fn drop_frequency_matches_rate() {
        let mut rng = seed::rng(42);
        let rates = [0.5; 4];
        let draws = 10_000;
        let mut drops = 0usize;
        for _ in 0..draws {
            // Feature 0 absorbs the keep-one guard; feature 3 is unbiased.
            drops += usize::from(sample_mask(&rates, &mut rng)[3]);
        }
        let freq = drops as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
    }

    proptest::proptest! {
        #[test]
        fn rates_are_bounded(losses in proptest::collection::vec(0.0f64..5.0, 1..10), g in 0.0f64..0.4) {
            let r = rates_from_losses(&losses, g);
            proptest::prop_assert!(r.iter().all(|&v| (0.0..=g).contains(&v)));
            proptest::prop_assert!(r.iter().any(|&v| v == g));
        }

        #[test]
        fn mask_keeps_something(rates in proptest::collection::vec(0.0f64..=1.0, 1..8), s in 0u64..100) {
            let m = sample_mask(&rates, &mut seed::rng(s));
            proptest::prop_assert!(m.iter().any(|&d| !d));
        }
    }
}
