//! Diagnostics for Dropout and Retain: ES weight concentration, per-layer
//! feature quality, masked least-squares weight shrinkage and the
//! train/test gap.

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Part, PredictionBlock, TaskKind};
use crate::error::{Result, StackError};
use crate::loss::{squared_error_loss, task_metric};
use crate::seed;
use crate::stack::blender::BLENDER_REPEATS;
use crate::stack::dropout::rates_from_losses;
use crate::stack::{
    build_deep_stack, fit_blender, fit_linear_blender, forward_layers, predict_stack, BlenderKind, EnsembleConfig,
    MAX_DROPOUT_RATE, MAX_LAYERS,
};
use crate::subset::select_subset;
use crate::zoo::CandidatePool;

pub const DEFAULT_GAMMA_GRID: [f64; 5] = [0.0, 0.1, 0.2, 0.3, 0.4];
/// Subset size and diversity weight of the ES weight experiment.
pub const WEIGHTS_SUBSET_SIZE: usize = 30;
pub const WEIGHTS_OMEGA: f64 = 0.3;
/// Rows of the orthogonal design in the shrinkage experiment.
pub const SHRINKAGE_ROWS: usize = 64;
pub const MIN_SAMPLINGS: usize = 100;

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(StackError::invalid("the dropout grid is empty"));
    }
    if let Some(g) = grid.iter().find(|g| !(0.0..=MAX_DROPOUT_RATE).contains(*g)) {
        return Err(StackError::invalid(format!("dropout rate {g} outside [0, {MAX_DROPOUT_RATE}]")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub gamma0: f64,
    /// Largest averaged ES weight over the weight total, mean over seeds.
    pub max_weight_proportion: f64,
    pub per_seed: Vec<f64>,
}

/// For each seed, selects a 30-model subset at ω = 0.3, then fits the ES
/// blender on the subset's validation predictions with five dropout
/// repeats per rate and records the share of the largest averaged weight.
pub fn experiment_dropout_weights(pool: &CandidatePool, ds: &Dataset, grid: &[f64], seeds: &[u64]) -> Result<Vec<WeightRow>> {
    check_grid(grid)?;
    if seeds.is_empty() {
        return Err(StackError::invalid("at least one seed is required"));
    }
    pool.check_dataset(ds)?;
    let y_val = ds.y(Part::Val);
    let mut per_seed = vec![Vec::with_capacity(seeds.len()); grid.len()];
    for &s in seeds {
        let subset = select_subset(pool, &y_val, WEIGHTS_SUBSET_SIZE, WEIGHTS_OMEGA, seed::derive_str(s, "subset"))?;
        let feats: Vec<&PredictionBlock> = subset.indices.iter().map(|&i| &pool.entries[i].val_pred).collect();
        for (g, &gamma0) in grid.iter().enumerate() {
            let blender = fit_blender(
                BlenderKind::EnsembleSelection,
                &feats,
                &y_val,
                ds.kind(),
                gamma0,
                BLENDER_REPEATS,
                seed::derive_str(s, "blender"),
            )?;
            let w = blender.es_average_weights().expect("ES blender has weights");
            let total: f64 = w.iter().sum();
            let max = w.iter().copied().fold(0.0, f64::max);
            per_seed[g].push(max / total);
        }
    }
    Ok(grid
        .iter()
        .zip(per_seed)
        .map(|(&gamma0, v)| WeightRow {
            gamma0,
            max_weight_proportion: v.iter().sum::<f64>() / v.len() as f64,
            per_seed: v,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRow {
    pub retain: bool,
    pub layer: usize,
    /// Mean over units of `(loss₁ − loss_l) / loss₁` on the test split.
    pub test_improvement: f64,
    /// The same rate from the units' validation losses.
    pub val_improvement: f64,
}

fn improvement(first: f64, current: f64) -> f64 {
    if first == 0.0 {
        0.0
    } else {
        (first - current) / first
    }
}

/// Builds a `max_layers`-deep stack (25 models, ω = 0.3, linear blender,
/// no dropout) with Retain on and off, and reports each layer's mean
/// per-unit improvement over layer 1. Unit losses are squared errors.
pub fn experiment_layer_improvement(pool: &CandidatePool, ds: &Dataset, max_layers: usize, seed_: u64) -> Result<Vec<LayerRow>> {
    if !(1..=MAX_LAYERS).contains(&max_layers) {
        return Err(StackError::invalid(format!("max_layers {max_layers} outside [1, {MAX_LAYERS}]")));
    }
    let x_test = ds.x(Part::Test);
    let y_test = ds.y(Part::Test);
    let mut rows = Vec::new();
    for retain in [true, false] {
        let config = EnsembleConfig {
            num_layers: max_layers,
            dropout_rate: 0.0,
            retain,
            ..EnsembleConfig::default()
        };
        let stack = build_deep_stack(&config, pool, ds, seed_, None)?;
        let outputs = forward_layers(&stack, &x_test)?;
        let test_losses = outputs
            .iter()
            .map(|layer| layer.iter().map(|p| squared_error_loss(p, &y_test, ds.kind())).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let units = stack.layers[0].units.len() as f64;
        for (l, layer) in stack.layers.iter().enumerate() {
            let mut test = 0.0;
            let mut val = 0.0;
            for (u, unit) in layer.units.iter().enumerate() {
                test += improvement(test_losses[0][u], test_losses[l][u]);
                val += improvement(stack.layers[0].units[u].val_loss, unit.val_loss);
            }
            rows.push(LayerRow {
                retain,
                layer: l + 1,
                test_improvement: test / units,
                val_improvement: val / units,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageRow {
    pub gamma0: f64,
    /// `|β̄₁| / Σ|β̄ᵢ|` of the Monte Carlo mean weights.
    pub proportion: f64,
    /// The same ratio computed from `pᵢ·β̂ᵢ`.
    pub expected_proportion: f64,
    pub drop_rates: Vec<f64>,
    pub mean_weights: Vec<f64>,
    /// `pᵢ·β̂ᵢ` with `pᵢ` the keep probability.
    pub expected_weights: Vec<f64>,
    pub standard_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageReport {
    /// Weights of the unmasked fit.
    pub full_weights: Vec<f64>,
    /// `|β̂₁| / Σ|β̂ᵢ|` without dropout.
    pub full_proportion: f64,
    pub rows: Vec<ShrinkageRow>,
}

/// Columns `1..=n` of the Sylvester–Hadamard matrix of order 64: zero-mean
/// and mutually orthogonal.
fn hadamard_columns(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((SHRINKAGE_ROWS, n), |(i, j)| {
        if ((i & (j + 1)) as u32).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    })
}

fn proportion(w: &[f64]) -> f64 {
    let total: f64 = w.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        0.0
    } else {
        w[0].abs() / total
    }
}

/// Masked least squares on orthogonal predictions. Prediction `i` is the
/// `i`-th orthogonal column and the target weights them by `1/i` plus
/// noise, so prediction 1 has the lowest loss. Per rate, `samplings` masks
/// are drawn with independent Bernoulli drops at the loss-proportional
/// rates, the linear blender is refit on the kept columns (dropped columns
/// get weight 0) and the weights are averaged.
pub fn experiment_theorem1(n_features: usize, grid: &[f64], samplings: usize, seed_: u64) -> Result<ShrinkageReport> {
    check_grid(grid)?;
    if !(2..SHRINKAGE_ROWS).contains(&n_features) {
        return Err(StackError::invalid(format!(
            "n_features {n_features} outside [2, {}]",
            SHRINKAGE_ROWS - 1
        )));
    }
    if samplings < MIN_SAMPLINGS {
        return Err(StackError::invalid(format!("need at least {MIN_SAMPLINGS} samplings, got {samplings}")));
    }
    let kind = TaskKind::Regression;
    let h = hadamard_columns(n_features);
    let mut rng = seed::rng(seed::derive_str(seed_, "shrinkage"));
    let y: Vec<f64> = (0..SHRINKAGE_ROWS)
        .map(|i| {
            let signal: f64 = (0..n_features).map(|j| h[[i, j]] / (j + 1) as f64).sum();
            signal + 0.1 * (rng.gen::<f64>() * 2.0 - 1.0)
        })
        .collect();
    let blocks: Vec<PredictionBlock> = (0..n_features)
        .map(|j| PredictionBlock::from_array(h.column(j).to_owned().insert_axis(ndarray::Axis(1))))
        .collect();
    let all: Vec<&PredictionBlock> = blocks.iter().collect();
    let losses = all
        .iter()
        .map(|b| squared_error_loss(b, &y, kind))
        .collect::<Result<Vec<_>>>()?;
    let full = fit_linear_blender(&all, &y, kind)?;
    let full_weights: Vec<f64> = full.coef.column(0).to_vec();

    let mut rows = Vec::with_capacity(grid.len());
    for (g, &gamma0) in grid.iter().enumerate() {
        let rates = rates_from_losses(&losses, gamma0);
        let mut mask_rng = seed::rng(seed::derive(seed::derive_str(seed_, "masks"), g as u64));
        let mut sum = vec![0.0; n_features];
        let mut sum_sq = vec![0.0; n_features];
        for _ in 0..samplings {
            let kept: Vec<usize> = (0..n_features).filter(|&j| mask_rng.gen::<f64>() >= rates[j]).collect();
            if kept.is_empty() {
                continue;
            }
            let cols: Vec<&PredictionBlock> = kept.iter().map(|&j| &blocks[j]).collect();
            let fit = fit_linear_blender(&cols, &y, kind)?;
            for (k, &j) in kept.iter().enumerate() {
                let w = fit.coef[[k, 0]];
                sum[j] += w;
                sum_sq[j] += w * w;
            }
        }
        let n = samplings as f64;
        let mean_weights: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let standard_errors: Vec<f64> = mean_weights
            .iter()
            .zip(&sum_sq)
            .map(|(m, sq)| {
                let var = ((sq / n - m * m) * n / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect();
        let expected_weights: Vec<f64> = full_weights.iter().zip(&rates).map(|(b, r)| (1.0 - r) * b).collect();
        rows.push(ShrinkageRow {
            gamma0,
            proportion: proportion(&mean_weights),
            expected_proportion: proportion(&expected_weights),
            drop_rates: rates,
            mean_weights,
            expected_weights,
            standard_errors,
        });
    }
    Ok(ShrinkageReport {
        full_proportion: proportion(&full_weights),
        full_weights,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub gamma0: f64,
    /// Blender loss on the final layer's OOF train features.
    pub train_loss: f64,
    pub test_loss: f64,
    /// `|train − test| / |train|`.
    pub gap: f64,
}

/// Builds `base` at every dropout rate and compares the blender's loss on
/// the features it was fit on with the stack's test loss.
pub fn experiment_overfitting_gap(
    pool: &CandidatePool,
    ds: &Dataset,
    base: &EnsembleConfig,
    grid: &[f64],
    seed_: u64,
) -> Result<Vec<GapRow>> {
    check_grid(grid)?;
    let y_train = ds.y(Part::Train);
    let y_test = ds.y(Part::Test);
    let x_test = ds.x(Part::Test);
    grid.iter()
        .map(|&gamma0| {
            let config = EnsembleConfig {
                dropout_rate: gamma0,
                ..*base
            };
            let stack = build_deep_stack(&config, pool, ds, seed_, None)?;
            let train_pred = stack.blender.predict(&stack.final_layer().oof_preds())?;
            let train_loss = task_metric(&train_pred, &y_train, ds.kind())?;
            let test_loss = task_metric(&predict_stack(&stack, &x_test)?, &y_test, ds.kind())?;
            Ok(GapRow {
                gamma0,
                train_loss,
                test_loss,
                gap: (train_loss - test_loss).abs() / train_loss.abs().max(1e-12),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use crate::zoo::build_pool;

    #[test]
    fn hadamard_columns_are_orthogonal_and_centered() {
        let h = hadamard_columns(7);
        for a in 0..7 {
            assert_eq!(h.column(a).sum(), 0.0);
            for b in 0..7 {
                let dot = h.column(a).dot(&h.column(b));
                assert_eq!(dot, if a == b { 64.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn shrinkage_without_dropout_is_the_full_fit() {
        let r = experiment_theorem1(5, &[0.0], 100, 1).unwrap();
        let row = &r.rows[0];
        for (m, b) in row.mean_weights.iter().zip(&r.full_weights) {
            assert!((m - b).abs() < 1e-9);
        }
        assert!((row.proportion - r.full_proportion).abs() < 1e-9);
        assert_eq!(row.drop_rates, vec![0.0; 5]);
        assert!(experiment_theorem1(1, &[0.0], 100, 1).is_err());
        assert!(experiment_theorem1(5, &[0.5], 100, 1).is_err());
        assert!(experiment_theorem1(5, &[0.1], 10, 1).is_err());
    }

    #[test]
    fn weights_table_has_one_row_per_rate() {
        let ds = synth::dominating_feature_task(150, 3, 0.2, 1).unwrap();
        let pool = build_pool(&ds, 12, 1).unwrap();
        let t = experiment_dropout_weights(&pool, &ds, &DEFAULT_GAMMA_GRID, &[0, 1]).unwrap();
        assert_eq!(t.len(), 5);
        for row in &t {
            assert!(row.max_weight_proportion > 0.0 && row.max_weight_proportion <= 1.0);
            assert_eq!(row.per_seed.len(), 2);
        }
    }

    #[test]
    fn layer_rows_start_at_zero_and_retain_is_monotone() {
        let ds = synth::regression_task(150, 3, 0.3, 2).unwrap();
        let pool = build_pool(&ds, 10, 2).unwrap();
        let rows = experiment_layer_improvement(&pool, &ds, 3, 0).unwrap();
        assert_eq!(rows.len(), 6);
        let on: Vec<&LayerRow> = rows.iter().filter(|r| r.retain).collect();
        assert_eq!(on[0].test_improvement, 0.0);
        assert_eq!(on[0].val_improvement, 0.0);
        for w in on.windows(2) {
            assert!(w[1].val_improvement >= w[0].val_improvement);
        }
    }
}
