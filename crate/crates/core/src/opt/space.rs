use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StackError};
use crate::seed::Rng;
use crate::stack::{BlenderKind, EnsembleConfig, MAX_DROPOUT_RATE, MAX_LAYERS};
use crate::subset::{MAX_ENSEMBLE_SIZE, MAX_OMEGA, MIN_ENSEMBLE_SIZE};

/// The six ensemble hyperparameters and their ranges. Narrower ranges are
/// allowed as long as they stay inside the valid bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub ensemble_size: (usize, usize),
    pub diversity_weight: (f64, f64),
    pub num_layers: (usize, usize),
    pub blenders: Vec<BlenderKind>,
    pub dropout_rate: (f64, f64),
    pub retain: Vec<bool>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            ensemble_size: (MIN_ENSEMBLE_SIZE, MAX_ENSEMBLE_SIZE),
            diversity_weight: (0.0, MAX_OMEGA),
            num_layers: (1, MAX_LAYERS),
            blenders: BlenderKind::ALL.to_vec(),
            dropout_rate: (0.0, MAX_DROPOUT_RATE),
            retain: vec![false, true],
        }
    }
}

/// Width of an encoded configuration.
pub const ENCODED_DIMS: usize = 8;

fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let ok = self.ensemble_size.0 <= self.ensemble_size.1
            && self.ensemble_size.0 >= MIN_ENSEMBLE_SIZE
            && self.ensemble_size.1 <= MAX_ENSEMBLE_SIZE
            && self.diversity_weight.0 <= self.diversity_weight.1
            && self.diversity_weight.0 >= 0.0
            && self.diversity_weight.1 <= MAX_OMEGA
            && self.num_layers.0 <= self.num_layers.1
            && self.num_layers.0 >= 1
            && self.num_layers.1 <= MAX_LAYERS
            && self.dropout_rate.0 <= self.dropout_rate.1
            && self.dropout_rate.0 >= 0.0
            && self.dropout_rate.1 <= MAX_DROPOUT_RATE
            && !self.blenders.is_empty()
            && !self.retain.is_empty();
        if ok {
            Ok(())
        } else {
            Err(StackError::invalid("search space bounds are empty or outside the valid ranges"))
        }
    }

    pub fn contains(&self, c: &EnsembleConfig) -> bool {
        (self.ensemble_size.0..=self.ensemble_size.1).contains(&c.ensemble_size)
            && (self.diversity_weight.0..=self.diversity_weight.1).contains(&c.diversity_weight)
            && (self.num_layers.0..=self.num_layers.1).contains(&c.num_layers)
            && self.blenders.contains(&c.blender)
            && (self.dropout_rate.0..=self.dropout_rate.1).contains(&c.dropout_rate)
            && self.retain.contains(&c.retain)
    }

    /// Ints and floats min-max scaled to [0,1], blender one-hot over all
    /// kinds, retain as 0/1.
    pub fn encode(&self, c: &EnsembleConfig) -> [f64; ENCODED_DIMS] {
        let mut out = [0.0; ENCODED_DIMS];
        out[0] = scale(c.ensemble_size as f64, self.ensemble_size.0 as f64, self.ensemble_size.1 as f64);
        out[1] = scale(c.diversity_weight, self.diversity_weight.0, self.diversity_weight.1);
        out[2] = scale(c.num_layers as f64, self.num_layers.0 as f64, self.num_layers.1 as f64);
        let b = BlenderKind::ALL.iter().position(|k| *k == c.blender).unwrap();
        out[3 + b] = 1.0;
        out[6] = scale(c.dropout_rate, self.dropout_rate.0, self.dropout_rate.1);
        out[7] = f64::from(u8::from(c.retain));
        out
    }

    fn sample_dim(&self, c: &mut EnsembleConfig, dim: usize, rng: &mut Rng) {
        match dim {
            0 => c.ensemble_size = rng.gen_range(self.ensemble_size.0..=self.ensemble_size.1),
            1 => c.diversity_weight = uniform(self.diversity_weight, rng),
            2 => c.num_layers = rng.gen_range(self.num_layers.0..=self.num_layers.1),
            3 => c.blender = self.blenders[rng.gen_range(0..self.blenders.len())],
            4 => c.dropout_rate = uniform(self.dropout_rate, rng),
            _ => c.retain = self.retain[rng.gen_range(0..self.retain.len())],
        }
    }

    /// Resamples one uniformly chosen dimension of `c`.
    pub fn perturb(&self, c: &EnsembleConfig, rng: &mut Rng) -> EnsembleConfig {
        let mut out = *c;
        let dim = rng.gen_range(0..6);
        self.sample_dim(&mut out, dim, rng);
        out
    }
}

fn uniform((lo, hi): (f64, f64), rng: &mut Rng) -> f64 {
    if hi > lo {
        lo + rng.gen::<f64>() * (hi - lo)
    } else {
        lo
    }
}

/// Every dimension drawn uniformly over its range or choices.
pub fn random_config(space: &SearchSpace, rng: &mut Rng) -> EnsembleConfig {
    let mut c = EnsembleConfig::default();
    for dim in 0..6 {
        space.sample_dim(&mut c, dim, rng);
    }
    c
}
