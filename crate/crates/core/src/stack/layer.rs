use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dropout::{compute_dropout_rates, sample_mask};
use crate::data::{Dataset, Part, PredictionBlock};
use crate::error::{Result, StackError};
use crate::loss::squared_error_loss;
use crate::seed;
use crate::zoo::{fit, predict, FittedLearner, LearnerConfig};

/// Cross-validation folds used by every stacker.
pub const NUM_FOLDS: usize = 5;

/// Fold id for each of `n` rows: a seeded shuffle cut into `k` contiguous,
/// near-equal chunks.
pub fn fold_partition(n: usize, k: usize, seed_: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(StackError::invalid(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(StackError::invalid(format!(
            "{n} training rows cannot fill {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed_));
    let mut folds = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        folds[row] = pos * k / n;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackerUnit {
    pub position: usize,
    pub config: LearnerConfig,
    pub fold_models: Vec<FittedLearner>,
    /// One mask per fold over the incoming predictive features; `true`
    /// marks a dropped feature. Empty at layer 1.
    pub fold_masks: Vec<Vec<bool>>,
    #[serde(skip)]
    pub oof_train_pred: PredictionBlock,
    #[serde(skip)]
    pub val_pred: PredictionBlock,
    /// Squared-error loss of `val_pred`.
    pub val_loss: f64,
    pub retained_from_previous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackLayer {
    /// 1-based depth.
    pub index: usize,
    /// Fold id per train row, shared by all units.
    pub folds: Vec<usize>,
    pub units: Vec<StackerUnit>,
}

impl StackLayer {
    pub fn oof_preds(&self) -> Vec<&PredictionBlock> {
        self.units.iter().map(|u| &u.oof_train_pred).collect()
    }

    pub fn val_preds(&self) -> Vec<&PredictionBlock> {
        self.units.iter().map(|u| &u.val_pred).collect()
    }

    pub fn fold_model_count(&self) -> usize {
        self.units.iter().map(|u| u.fold_models.len()).sum()
    }
}

/// Stacker input: the kept predictive features in position order, followed
/// by the original features.
pub fn stacker_input(prev: &[&PredictionBlock], dropped: &[bool], x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let mut parts: Vec<ArrayView2<'_, f64>> = Vec::with_capacity(prev.len() + 1);
    for (i, block) in prev.iter().enumerate() {
        if !dropped.get(i).copied().unwrap_or(false) {
            if block.rows() != x.nrows() {
                return Err(StackError::shape("predictive feature rows do not match the input rows"));
            }
            parts.push(block.values().view());
        }
    }
    parts.push(x);
    concatenate(Axis(1), &parts).map_err(|e| StackError::shape(e.to_string()))
}

/// Incoming predictive features for one unit, as train OOF and val blocks.
pub struct PrevFeatures<'a> {
    pub train: Vec<&'a PredictionBlock>,
    pub val: Vec<&'a PredictionBlock>,
}

/// Trains one stacker with k-fold CV. Fold `j`'s model is fit on rows whose
/// fold id differs from `j`, using `masks[j]` over the incoming features,
/// and predicts the held-out rows (OOF) and the val split. `val_pred` is the
/// mean of the k val predictions.
#[allow(clippy::too_many_arguments)]
pub fn train_stacker_cv(
    position: usize,
    config: &LearnerConfig,
    ds: &Dataset,
    prev: Option<&PrevFeatures<'_>>,
    masks: &[Vec<bool>],
    folds: &[usize],
    unit_seed: u64,
) -> Result<StackerUnit> {
    let x_train = ds.x(Part::Train);
    let y_train = ds.y(Part::Train);
    let x_val = ds.x(Part::Val);
    let y_val = ds.y(Part::Val);
    let kind = ds.kind();
    let k = folds.iter().copied().max().map_or(0, |m| m + 1);
    if folds.len() != x_train.nrows() {
        return Err(StackError::shape("fold assignment does not cover the train split"));
    }
    if prev.is_some() && masks.len() != k {
        return Err(StackError::invalid("one mask per fold is required after layer 1"));
    }
    let no_mask: Vec<bool> = Vec::new();
    let empty: Vec<&PredictionBlock> = Vec::new();
    let (prev_train, prev_val) = match prev {
        Some(p) => (&p.train, &p.val),
        None => (&empty, &empty),
    };

    let mut oof = Array2::<f64>::zeros((x_train.nrows(), kind.width()));
    let mut fold_models = Vec::with_capacity(k);
    let mut val_preds = Vec::with_capacity(k);
    for j in 0..k {
        let mask = if prev.is_some() { &masks[j] } else { &no_mask };
        let fit_rows: Vec<usize> = (0..folds.len()).filter(|&r| folds[r] != j).collect();
        let held_rows: Vec<usize> = (0..folds.len()).filter(|&r| folds[r] == j).collect();
        let train_in = stacker_input(prev_train, mask, x_train.view())?;
        let fit_x = train_in.select(Axis(0), &fit_rows);
        let fit_y: Vec<f64> = fit_rows.iter().map(|&r| y_train[r]).collect();
        let mut fold_config = config.clone();
        fold_config.seed = seed::derive(unit_seed, j as u64);
        let model = fit(&fold_config, &fit_x, &fit_y, kind)?;
        let held = predict(&model, &train_in.select(Axis(0), &held_rows))?;
        for (h, &r) in held_rows.iter().enumerate() {
            oof.row_mut(r).assign(&held.values().row(h));
        }
        let val_in = stacker_input(prev_val, mask, x_val.view())?;
        val_preds.push(predict(&model, &val_in)?);
        fold_models.push(model);
    }
    let val_pred = PredictionBlock::mean(&val_preds)?;
    let val_loss = squared_error_loss(&val_pred, &y_val, kind)?;
    Ok(StackerUnit {
        position,
        config: config.clone(),
        fold_models,
        fold_masks: if prev.is_some() { masks.to_vec() } else { Vec::new() },
        oof_train_pred: PredictionBlock::from_array(oof),
        val_pred,
        val_loss,
        retained_from_previous: false,
    })
}

/// Replaces `current`'s outputs with bit-copies of `predecessor`'s when its
/// validation loss is strictly worse.
pub fn apply_retain(mut current: StackerUnit, predecessor: &StackerUnit) -> Result<StackerUnit> {
    if current.position != predecessor.position
        || current.config.algorithm != predecessor.config.algorithm
        || current.config.params != predecessor.config.params
    {
        return Err(StackError::invalid(format!(
            "retain predecessor mismatch at position {}",
            current.position
        )));
    }
    if current.val_loss > predecessor.val_loss {
        current.oof_train_pred = predecessor.oof_train_pred.clone();
        current.val_pred = predecessor.val_pred.clone();
        current.val_loss = predecessor.val_loss;
        current.retained_from_previous = true;
    }
    Ok(current)
}

/// Trains layer `index` over `configs`. Fold partition, dropout masks and
/// fold-model seeds all derive from `layer_seed`.
pub fn train_layer(
    index: usize,
    configs: &[LearnerConfig],
    ds: &Dataset,
    prev_layer: Option<&StackLayer>,
    dropout_rate: f64,
    retain: bool,
    layer_seed: u64,
) -> Result<StackLayer> {
    if (index > 1) != prev_layer.is_some() {
        return Err(StackError::invalid("a previous layer is required exactly when index > 1"));
    }
    if let Some(p) = prev_layer {
        if p.units.len() != configs.len() {
            return Err(StackError::shape("previous layer width differs from the subset size"));
        }
    }
    let n_train = ds.split().train.len();
    let folds = fold_partition(n_train, NUM_FOLDS, seed::derive_str(layer_seed, "folds"))?;

    // Every mask is drawn before any fitting.
    let mut masks: Vec<Vec<Vec<bool>>> = vec![Vec::new(); configs.len()];
    let prev = match prev_layer {
        Some(p) => {
            let y_train = ds.y(Part::Train);
            let rates = compute_dropout_rates(&p.oof_preds(), &y_train, ds.kind(), dropout_rate)?;
            let mut rng = seed::rng(seed::derive_str(layer_seed, "masks"));
            for unit_masks in masks.iter_mut() {
                for _ in 0..NUM_FOLDS {
                    unit_masks.push(sample_mask(&rates, &mut rng));
                }
            }
            Some(PrevFeatures {
                train: p.oof_preds(),
                val: p.val_preds(),
            })
        }
        None => None,
    };

    let mut units = Vec::with_capacity(configs.len());
    for (pos, config) in configs.iter().enumerate() {
        let unit_seed = seed::derive(layer_seed, pos as u64);
        let mut unit = train_stacker_cv(pos, config, ds, prev.as_ref(), &masks[pos], &folds, unit_seed)?;
        if retain {
            if let Some(p) = prev_layer {
                unit = apply_retain(unit, &p.units[pos])?;
            }
        }
        units.push(unit);
    }
    Ok(StackLayer { index, folds, units })
}

/// Inference for one unit given the previous layer's outputs on the same
/// rows. Retained units forward their predecessor's output.
pub fn unit_forward(
    unit: &StackerUnit,
    prev_outputs: Option<&[PredictionBlock]>,
    x: &Array2<f64>,
) -> Result<PredictionBlock> {
    if unit.retained_from_previous {
        let prev = prev_outputs.ok_or_else(|| StackError::invalid("retained unit at layer 1"))?;
        return Ok(prev[unit.position].clone());
    }
    let prev_refs: Vec<&PredictionBlock> = prev_outputs.map(|p| p.iter().collect()).unwrap_or_default();
    let no_mask: Vec<bool> = Vec::new();
    let mut preds = Vec::with_capacity(unit.fold_models.len());
    for (j, model) in unit.fold_models.iter().enumerate() {
        let mask = unit.fold_masks.get(j).unwrap_or(&no_mask);
        let input = stacker_input(&prev_refs, mask, x.view())?;
        preds.push(predict(model, &input)?);
    }
    PredictionBlock::mean(&preds)
}
