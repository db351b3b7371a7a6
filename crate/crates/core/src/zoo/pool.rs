//! The candidate pool: fitted base-model configurations with their
//! validation predictions and losses.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{fit, predict, Algorithm, FittedLearner, LearnerConfig};
use crate::blockio;
use crate::data::{Dataset, Part, PredictionBlock, TaskKind};
use crate::error::{Result, StackError};
use crate::loss::squared_error_loss;
use crate::seed;

pub const MIN_POOL_SIZE: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub config: LearnerConfig,
    pub val_pred: PredictionBlock,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub kind: TaskKind,
    pub entries: Vec<PoolEntry>,
    pub dataset_fingerprint: String,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn val_preds(&self) -> Vec<&PredictionBlock> {
        self.entries.iter().map(|e| &e.val_pred).collect()
    }

    pub fn configs(&self) -> Vec<LearnerConfig> {
        self.entries.iter().map(|e| e.config.clone()).collect()
    }

    /// Assembles a pool from configurations by fitting each on the train
    /// split and scoring it on the val split. Entries keep input order.
    pub fn from_configs(ds: &Dataset, configs: Vec<LearnerConfig>) -> Result<Self> {
        let x_train = ds.x(Part::Train);
        let y_train = ds.y(Part::Train);
        let x_val = ds.x(Part::Val);
        let y_val = ds.y(Part::Val);
        let mut entries = Vec::with_capacity(configs.len());
        for config in configs {
            let model = fit(&config, &x_train, &y_train, ds.kind())?;
            let val_pred = predict(&model, &x_val)?;
            let val_loss = squared_error_loss(&val_pred, &y_val, ds.kind())?;
            entries.push(PoolEntry {
                config,
                val_pred,
                val_loss,
            });
        }
        Ok(CandidatePool {
            kind: ds.kind(),
            entries,
            dataset_fingerprint: ds.fingerprint(),
        })
    }

    /// Refits entry `index` on the train split.
    pub fn refit(&self, index: usize, ds: &Dataset) -> Result<FittedLearner> {
        let entry = self
            .entries
            .get(index)
            .ok_or_else(|| StackError::invalid(format!("pool has no entry {index}")))?;
        fit(&entry.config, &ds.x(Part::Train), &ds.y(Part::Train), ds.kind())
    }

    /// Digest of the dataset fingerprint and every entry's configuration.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.dataset_fingerprint.as_bytes());
        for e in &self.entries {
            h.update(serde_json::to_vec(&e.config).unwrap_or_default());
        }
        hex::encode(h.finalize())
    }

    pub fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        if ds.fingerprint() != self.dataset_fingerprint {
            return Err(StackError::invalid(
                "pool was built on a different dataset or split (fingerprint mismatch)",
            ));
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path, meta: Option<PoolMeta>) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| StackError::io(dir, e))?;
        let mut manifest = PoolManifest {
            kind: self.kind,
            fingerprint: self.dataset_fingerprint.clone(),
            meta,
            entries: Vec::with_capacity(self.entries.len()),
        };
        for (i, e) in self.entries.iter().enumerate() {
            let file = format!("val_pred_{i:04}.bin");
            blockio::write(&dir.join(&file), &e.val_pred)?;
            manifest.entries.push(ManifestEntry {
                config: e.config.clone(),
                val_loss: e.val_loss,
                val_pred: file,
            });
        }
        let path = dir.join("pool.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text).map_err(|e| StackError::io(path, e))
    }

    pub fn load(dir: &Path) -> Result<(Self, Option<PoolMeta>)> {
        let path = dir.join("pool.json");
        let text = fs::read_to_string(&path).map_err(|e| StackError::io(&path, e))?;
        let manifest: PoolManifest = serde_json::from_str(&text)?;
        let mut entries = Vec::with_capacity(manifest.entries.len());
        for m in manifest.entries {
            let val_pred = blockio::read(&dir.join(&m.val_pred))?;
            entries.push(PoolEntry {
                config: m.config,
                val_pred,
                val_loss: m.val_loss,
            });
        }
        Ok((
            CandidatePool {
                kind: manifest.kind,
                entries,
                dataset_fingerprint: manifest.fingerprint,
            },
            manifest.meta,
        ))
    }
}

/// Where a persisted pool's data came from, so later commands can rebuild
/// the identical split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolMeta {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub split_seed: u64,
    pub fractions: (f64, f64, f64),
}

#[derive(Serialize, Deserialize)]
struct PoolManifest {
    kind: TaskKind,
    fingerprint: String,
    #[serde(default)]
    meta: Option<PoolMeta>,
    entries: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    config: LearnerConfig,
    val_loss: f64,
    val_pred: String,
}

/// Random search over the zoo: each configuration draws an algorithm
/// uniformly among those supporting the task, then every hyperparameter
/// from its sampling range. Entries are sorted by validation loss.
pub fn build_pool(ds: &Dataset, pool_size: usize, seed: u64) -> Result<CandidatePool> {
    if pool_size < MIN_POOL_SIZE {
        return Err(StackError::invalid(format!(
            "pool_size {pool_size} is below {MIN_POOL_SIZE}, the smallest ensemble size"
        )));
    }
    if ds.split().train.is_empty() || ds.split().val.is_empty() {
        return Err(StackError::invalid("dataset must be split before building a pool"));
    }
    let algorithms: Vec<Algorithm> = Algorithm::ALL
        .into_iter()
        .filter(|a| a.supports(ds.kind()))
        .collect();
    let mut rng = seed::rng(seed::derive_str(seed, "pool"));
    let configs: Vec<LearnerConfig> = (0..pool_size)
        .map(|i| {
            let alg = *algorithms.choose(&mut rng).unwrap();
            LearnerConfig::random(alg, &mut rng, seed::derive(seed, i as u64))
        })
        .collect();
    let mut pool = CandidatePool::from_configs(ds, configs)?;
    pool.entries
        .sort_by(|a, b| a.val_loss.total_cmp(&b.val_loss));
    Ok(pool)
}
