use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Blender, DeepStack, EnsembleConfig, StackLayer};
use crate::blockio;
use crate::data::TaskKind;
use crate::error::{Result, StackError};
use crate::subset::SubsetSelection;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string(value)?;
    fs::write(path, text).map_err(|e| StackError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| StackError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// `layer.json` plus two prediction blocks per unit.
pub(crate) fn save_layer(dir: &Path, layer: &StackLayer) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| StackError::io(dir, e))?;
    for u in &layer.units {
        blockio::write(&dir.join(format!("unit_{:04}_oof.bin", u.position)), &u.oof_train_pred)?;
        blockio::write(&dir.join(format!("unit_{:04}_val.bin", u.position)), &u.val_pred)?;
    }
    write_json(&dir.join("layer.json"), layer)
}

pub(crate) fn load_layer(dir: &Path) -> Result<StackLayer> {
    let mut layer: StackLayer = read_json(&dir.join("layer.json"))?;
    for u in &mut layer.units {
        u.oof_train_pred = blockio::read(&dir.join(format!("unit_{:04}_oof.bin", u.position)))?;
        u.val_pred = blockio::read(&dir.join(format!("unit_{:04}_val.bin", u.position)))?;
    }
    Ok(layer)
}

#[derive(Serialize, Deserialize)]
struct StackManifest {
    config: EnsembleConfig,
    subset: SubsetSelection,
    blender: Blender,
    val_loss: f64,
    seed: u64,
    cache_key: String,
    task: TaskKind,
    input_width: usize,
    num_layers: usize,
}

pub(crate) fn save_stack(stack: &DeepStack, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| StackError::io(dir, e))?;
    for layer in &stack.layers {
        save_layer(&dir.join(format!("layer_{}", layer.index)), layer)?;
    }
    blockio::write(&dir.join("val_pred.bin"), &stack.val_pred)?;
    let manifest = StackManifest {
        config: stack.config,
        subset: stack.subset.clone(),
        blender: stack.blender.clone(),
        val_loss: stack.val_loss,
        seed: stack.seed,
        cache_key: stack.cache_key.clone(),
        task: stack.task,
        input_width: stack.input_width,
        num_layers: stack.layers.len(),
    };
    write_json(&dir.join("stack.json"), &manifest)
}

pub(crate) fn load_stack(dir: &Path) -> Result<DeepStack> {
    let m: StackManifest = read_json(&dir.join("stack.json"))?;
    let layers = (1..=m.num_layers)
        .map(|i| load_layer(&dir.join(format!("layer_{i}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(DeepStack {
        config: m.config,
        subset: m.subset,
        layers,
        blender: m.blender,
        val_loss: m.val_loss,
        val_pred: blockio::read(&dir.join("val_pred.bin"))?,
        seed: m.seed,
        cache_key: m.cache_key,
        task: m.task,
        input_width: m.input_width,
    })
}
