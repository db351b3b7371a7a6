//! Multi-layer stacking. Every layer retrains the selected base
//! configurations as stackers with k-fold out-of-fold (OOF) training on the
//! previous layer's predictive features concatenated with the original
//! features. Dropout masks incoming predictive features with
//! loss-proportional rates; Retain keeps a stacker's predecessor outputs
//! when it validates worse. A blender combines the final layer.

pub mod blender;
pub mod dropout;
pub mod layer;
pub(crate) mod persist;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Part, PredictionBlock, TaskKind};
use crate::error::{Result, StackError};
use crate::loss::task_metric;
use crate::opt::cache::{cache_key, ReusePlan, StackCache};
use crate::seed;
use crate::subset::{select_subset, SubsetSelection, MAX_ENSEMBLE_SIZE, MAX_OMEGA, MIN_ENSEMBLE_SIZE};
use crate::zoo::{CandidatePool, LearnerConfig};

pub use blender::{fit_blender, fit_ensemble_selection, fit_linear_blender, Blender, BlenderKind};
pub use dropout::{compute_dropout_rates, sample_mask, MAX_DROPOUT_RATE};
pub use layer::{apply_retain, fold_partition, train_layer, train_stacker_cv, StackLayer, StackerUnit, NUM_FOLDS};

pub const MAX_LAYERS: usize = 5;

/// A point in the ensemble search space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub ensemble_size: usize,
    pub diversity_weight: f64,
    pub num_layers: usize,
    pub blender: BlenderKind,
    pub dropout_rate: f64,
    pub retain: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            ensemble_size: 25,
            diversity_weight: 0.3,
            num_layers: 2,
            blender: BlenderKind::Linear,
            dropout_rate: 0.0,
            retain: true,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(MIN_ENSEMBLE_SIZE..=MAX_ENSEMBLE_SIZE).contains(&self.ensemble_size) {
            return Err(StackError::invalid(format!(
                "ensemble_size {} outside [{MIN_ENSEMBLE_SIZE}, {MAX_ENSEMBLE_SIZE}]",
                self.ensemble_size
            )));
        }
        self.validate_shape()
    }

    /// Everything but the ensemble size, which fixed-strategy baselines set
    /// from a literal subset.
    fn validate_shape(&self) -> Result<()> {
        if !(0.0..=MAX_OMEGA).contains(&self.diversity_weight) {
            return Err(StackError::invalid(format!(
                "diversity_weight {} outside [0, {MAX_OMEGA}]",
                self.diversity_weight
            )));
        }
        if !(1..=MAX_LAYERS).contains(&self.num_layers) {
            return Err(StackError::invalid(format!(
                "num_layers {} outside [1, {MAX_LAYERS}]",
                self.num_layers
            )));
        }
        if !(0.0..=MAX_DROPOUT_RATE).contains(&self.dropout_rate) {
            return Err(StackError::invalid(format!(
                "dropout_rate {} outside [0, {MAX_DROPOUT_RATE}]",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

impl fmt::Display for EnsembleConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "size={} omega={:.3} layers={} blender={} dropout={:.3} retain={}",
            self.ensemble_size,
            self.diversity_weight,
            self.num_layers,
            self.blender.name(),
            self.dropout_rate,
            self.retain
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepStack {
    pub config: EnsembleConfig,
    pub subset: SubsetSelection,
    pub layers: Vec<StackLayer>,
    pub blender: Blender,
    /// Error rate (classification) or MSE (regression) of `val_pred`.
    pub val_loss: f64,
    pub val_pred: PredictionBlock,
    pub seed: u64,
    pub cache_key: String,
    pub task: TaskKind,
    pub input_width: usize,
}

impl DeepStack {
    pub fn final_layer(&self) -> &StackLayer {
        self.layers.last().expect("a stack has at least one layer")
    }

    pub fn save(&self, dir: &std::path::Path) -> Result<()> {
        persist::save_stack(self, dir)
    }

    pub fn load(dir: &std::path::Path) -> Result<Self> {
        persist::load_stack(dir)
    }
}

/// Selects the subset for `config` and builds the stack on it.
pub fn build_deep_stack(
    config: &EnsembleConfig,
    pool: &CandidatePool,
    ds: &Dataset,
    seed_: u64,
    cache: Option<&mut StackCache>,
) -> Result<DeepStack> {
    config.validate()?;
    pool.check_dataset(ds)?;
    let subset = select_subset(
        pool,
        &ds.y(Part::Val),
        config.ensemble_size,
        config.diversity_weight,
        seed::derive_str(seed_, "subset"),
    )?;
    build_on_subset(config, subset, pool, ds, seed_, cache)
}

/// Builds a stack over an explicit subset; `config.ensemble_size` and
/// `config.diversity_weight` are informational here.
pub fn build_on_subset(
    config: &EnsembleConfig,
    subset: SubsetSelection,
    pool: &CandidatePool,
    ds: &Dataset,
    seed_: u64,
    cache: Option<&mut StackCache>,
) -> Result<DeepStack> {
    config.validate_shape()?;
    pool.check_dataset(ds)?;
    if subset.indices.is_empty() {
        return Err(StackError::invalid("cannot stack an empty subset"));
    }
    let configs: Vec<LearnerConfig> = subset
        .indices
        .iter()
        .map(|&i| {
            pool.entries
                .get(i)
                .map(|e| e.config.clone())
                .ok_or_else(|| StackError::invalid(format!("subset index {i} outside the pool")))
        })
        .collect::<Result<_>>()?;
    let key = cache_key(&subset.indices, config.dropout_rate, config.retain, &pool.fingerprint(), seed_);
    let key_seed = seed::derive_str(seed_, &key);

    let mut layers: Vec<StackLayer> = Vec::new();
    let mut cache = cache;
    if let Some(c) = cache.as_deref() {
        let wanted = match c.plan(&key, config.num_layers) {
            ReusePlan::Scratch => 0,
            ReusePlan::Extend { cached } => cached,
            ReusePlan::BlenderOnly { .. } => config.num_layers,
        };
        if wanted > 0 {
            match c.load_layers(&key, wanted) {
                Ok(l) => layers = l,
                Err(e) => log::warn!("ignoring unreadable cache entry {key}: {e}"),
            }
        }
    }
    let reused = layers.len();
    for index in reused + 1..=config.num_layers {
        let layer = train_layer(
            index,
            &configs,
            ds,
            layers.last(),
            config.dropout_rate,
            config.retain,
            seed::derive(key_seed, index as u64),
        )?;
        layers.push(layer);
    }
    if let Some(c) = cache.as_deref_mut() {
        if layers.len() > reused {
            if let Err(e) = c.store_layers(&key, &layers) {
                log::warn!("could not cache stack {key}: {e}");
            }
        }
    }

    let last = layers.last().unwrap();
    let blender = fit_blender(
        config.blender,
        &last.oof_preds(),
        &ds.y(Part::Train),
        ds.kind(),
        config.dropout_rate,
        blender::BLENDER_REPEATS,
        seed::derive(seed::derive_str(key_seed, "blender"), config.num_layers as u64),
    )?;
    let val_pred = blender.predict(&last.val_preds())?;
    let val_loss = task_metric(&val_pred, &ds.y(Part::Val), ds.kind())?;
    Ok(DeepStack {
        config: *config,
        subset,
        layers,
        blender,
        val_loss,
        val_pred,
        seed: seed_,
        cache_key: key,
        task: ds.kind(),
        input_width: ds.n_features(),
    })
}

/// Per-layer, per-position stacker outputs on `x`.
pub fn forward_layers(stack: &DeepStack, x: &ndarray::Array2<f64>) -> Result<Vec<Vec<PredictionBlock>>> {
    if x.ncols() != stack.input_width {
        return Err(StackError::shape(format!(
            "stack expects {} features, got {}",
            stack.input_width,
            x.ncols()
        )));
    }
    let mut outputs: Vec<Vec<PredictionBlock>> = Vec::with_capacity(stack.layers.len());
    for layer in &stack.layers {
        let prev = outputs.last().map(|v| v.as_slice());
        let out = layer
            .units
            .iter()
            .map(|u| layer::unit_forward(u, prev, x))
            .collect::<Result<Vec<_>>>()?;
        outputs.push(out);
    }
    Ok(outputs)
}

pub fn predict_stack(stack: &DeepStack, x: &ndarray::Array2<f64>) -> Result<PredictionBlock> {
    let outputs = forward_layers(stack, x)?;
    let last: Vec<&PredictionBlock> = outputs.last().unwrap().iter().collect();
    stack.blender.predict(&last)
}
