//! On-disk reuse of trained stack layers. Layers depend only on the subset,
//! the dropout rate, the retain flag, the pool and the seed; the blender
//! kind and depth do not enter the key, so a cached stack can be extended
//! with more layers or re-blended over a prefix.
//!
//! Layout: `<root>/<key>/layer_<i>/` per layer and `<root>/index.json`
//! mapping each key to its stored depth.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, StackError};
use crate::stack::persist::{load_layer, save_layer};
use crate::stack::{EnsembleConfig, StackLayer};
use crate::subset::SubsetSelection;

pub fn cache_key(subset: &[usize], dropout_rate: f64, retain: bool, pool_fingerprint: &str, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(pool_fingerprint.as_bytes());
    h.update(seed.to_le_bytes());
    h.update((subset.len() as u64).to_le_bytes());
    for &i in subset {
        h.update((i as u64).to_le_bytes());
    }
    h.update(dropout_rate.to_bits().to_le_bytes());
    h.update([u8::from(retain)]);
    hex::encode(&h.finalize()[..16])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReusePlan {
    Scratch,
    /// Load `cached` layers and train the rest.
    Extend { cached: usize },
    /// Enough layers are cached; only the blender is refit.
    BlenderOnly { cached: usize },
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    entries: BTreeMap<String, usize>,
}

#[derive(Debug)]
pub struct StackCache {
    root: PathBuf,
    index: Index,
}

impl StackCache {
    /// Opens (creating if needed) a cache at `root`. Entries whose layer
    /// directories are missing are dropped with a warning.
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| StackError::io(root, e))?;
        let path = root.join("index.json");
        let mut index: Index = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_else(|e| {
                log::warn!("discarding corrupt cache index {}: {e}", path.display());
                Index::default()
            }),
            Err(_) => Index::default(),
        };
        index.entries.retain(|key, &mut depth| {
            let ok = (1..=depth).all(|i| root.join(key).join(format!("layer_{i}")).join("layer.json").is_file());
            if !ok {
                log::warn!("dropping cache entry {key}: missing layer files");
            }
            ok
        });
        Ok(StackCache {
            root: root.to_path_buf(),
            index,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cached_depth(&self, key: &str) -> Option<usize> {
        self.index.entries.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.index.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.entries.is_empty()
    }

    pub fn plan(&self, key: &str, layers: usize) -> ReusePlan {
        match self.cached_depth(key) {
            None | Some(0) => ReusePlan::Scratch,
            Some(c) if c < layers => ReusePlan::Extend { cached: c },
            Some(c) => ReusePlan::BlenderOnly { cached: c },
        }
    }

    pub fn load_layers(&self, key: &str, count: usize) -> Result<Vec<StackLayer>> {
        let depth = self.cached_depth(key).unwrap_or(0);
        if count > depth {
            return Err(StackError::invalid(format!("cache entry {key} holds {depth} layers, not {count}")));
        }
        let layers = (1..=count)
            .map(|i| load_layer(&self.root.join(key).join(format!("layer_{i}"))))
            .collect::<Result<Vec<_>>>()?;
        if layers.iter().enumerate().any(|(i, l)| l.index != i + 1) {
            return Err(StackError::Format(format!("cache entry {key} has misnumbered layers")));
        }
        Ok(layers)
    }

    /// Writes layers beyond the stored depth and updates the index.
    pub fn store_layers(&mut self, key: &str, layers: &[StackLayer]) -> Result<()> {
        let depth = self.cached_depth(key).unwrap_or(0);
        if layers.len() <= depth {
            return Ok(());
        }
        for layer in &layers[depth..] {
            save_layer(&self.root.join(key).join(format!("layer_{}", layer.index)), layer)?;
        }
        self.index.entries.insert(key.to_string(), layers.len());
        let path = self.root.join("index.json");
        let text = serde_json::to_string_pretty(&self.index)?;
        fs::write(&path, text).map_err(|e| StackError::io(path, e))
    }
}

/// Reuse plan for building `config` over `subset`.
pub fn cache_lookup(
    cache: &StackCache,
    config: &EnsembleConfig,
    subset: &SubsetSelection,
    pool_fingerprint: &str,
    seed: u64,
) -> ReusePlan {
    let key = cache_key(&subset.indices, config.dropout_rate, config.retain, pool_fingerprint, seed);
    cache.plan(&key, config.num_layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_depends_on_each_component() {
        let k = cache_key(&[0, 1, 2], 0.1, true, "fp", 1);
        assert_eq!(k, cache_key(&[0, 1, 2], 0.1, true, "fp", 1));
        assert_eq!(k.len(), 32);
        for other in [
            cache_key(&[0, 1, 3], 0.1, true, "fp", 1),
            cache_key(&[0, 1, 2], 0.2, true, "fp", 1),
            cache_key(&[0, 1, 2], 0.1, false, "fp", 1),
            cache_key(&[0, 1, 2], 0.1, true, "fq", 1),
            cache_key(&[0, 1, 2], 0.1, true, "fp", 2),
        ] {
            assert_ne!(k, other);
        }
    }

    #[test]
    fn plans_follow_cached_depth() {
        let dir = tempfile::tempdir().unwrap();
        let mut cache = StackCache::open(dir.path()).unwrap();
        assert_eq!(cache.plan("k", 3), ReusePlan::Scratch);
        cache.index.entries.insert("k".into(), 3);
        assert_eq!(cache.plan("k", 5), ReusePlan::Extend { cached: 3 });
        assert_eq!(cache.plan("k", 2), ReusePlan::BlenderOnly { cached: 3 });
        assert_eq!(cache.plan("k", 3), ReusePlan::BlenderOnly { cached: 3 });
    }

    #[test]
    fn corrupt_index_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("index.json"), "{not json").unwrap();
        let cache = StackCache::open(dir.path()).unwrap();
        assert!(cache.is_empty());
        fs::write(dir.path().join("index.json"), r#"{"entries":{"abc":2}}"#).unwrap();
        let cache = StackCache::open(dir.path()).unwrap();
        assert_eq!(cache.plan("abc", 2), ReusePlan::Scratch);
    }
}
