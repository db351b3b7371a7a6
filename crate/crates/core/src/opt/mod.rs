//! Bayesian optimization over ensemble configurations: a forced default
//! evaluation, random exploration until five observations exist, then a
//! random-forest surrogate with expected improvement.

pub mod cache;
pub mod space;
pub mod surrogate;

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, StackError};
use crate::seed;
use crate::stack::{build_deep_stack, DeepStack, EnsembleConfig};
use crate::zoo::CandidatePool;

pub use cache::{cache_key, cache_lookup, ReusePlan, StackCache};
pub use space::{random_config, SearchSpace};
pub use surrogate::{expected_improvement, fit_surrogate, SurrogateForest};

/// Observations needed before the surrogate takes over.
pub const INITIAL_DESIGN: usize = 5;
pub const RANDOM_CANDIDATES: usize = 1000;
pub const PERTURBED_CANDIDATES: usize = 20;
const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub config: EnsembleConfig,
    pub val_loss: f64,
    /// Seconds spent building and scoring the stack.
    pub wall_time: f64,
    pub cache_key: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Iterations(usize),
    Seconds(f64),
}

impl FromStr for Budget {
    type Err = StackError;

    /// `25` is an iteration count; `30s` is a wall-clock limit.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || StackError::invalid(format!("budget {s:?} is neither <iterations> nor <seconds>s"));
        if let Some(secs) = s.strip_suffix('s') {
            let v: f64 = secs.parse().map_err(|_| bad())?;
            if !(v >= 0.0) {
                return Err(bad());
            }
            Ok(Budget::Seconds(v))
        } else {
            s.parse::<usize>().map(Budget::Iterations).map_err(|_| bad())
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Iterations(n) => write!(f, "{n}"),
            Budget::Seconds(s) => write!(f, "{s}s"),
        }
    }
}

fn observed(observations: &[Observation], c: &EnsembleConfig) -> bool {
    observations.iter().any(|o| o.config == *c)
}

fn random_unobserved(space: &SearchSpace, observations: &[Observation], rng: &mut seed::Rng) -> EnsembleConfig {
    let mut c = random_config(space, rng);
    for _ in 0..MAX_REDRAWS {
        if !observed(observations, &c) {
            break;
        }
        c = random_config(space, rng);
    }
    c
}

/// Next configuration to evaluate. Random while fewer than five
/// observations exist; afterwards the EI maximizer over random candidates
/// and one-dimension perturbations of the incumbent, skipping configs that
/// were already observed.
pub fn suggest_next(space: &SearchSpace, observations: &[Observation], rng: &mut seed::Rng) -> Result<EnsembleConfig> {
    use rand::Rng as _;
    if observations.len() < INITIAL_DESIGN {
        return Ok(random_unobserved(space, observations, rng));
    }
    let surrogate = fit_surrogate(space, observations, rng.gen())?;
    let incumbent = observations
        .iter()
        .min_by(|a, b| a.val_loss.total_cmp(&b.val_loss))
        .unwrap();
    let best = incumbent.val_loss;
    let mut candidates: Vec<EnsembleConfig> = (0..RANDOM_CANDIDATES).map(|_| random_config(space, rng)).collect();
    candidates.extend((0..PERTURBED_CANDIDATES).map(|_| space.perturb(&incumbent.config, rng)));
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| (expected_improvement(&surrogate, c, best), i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, i) in &scored {
        if !observed(observations, &candidates[*i]) {
            return Ok(candidates[*i]);
        }
    }
    Ok(random_unobserved(space, observations, rng))
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub best_config: EnsembleConfig,
    pub best_stack: DeepStack,
    pub history: Vec<Observation>,
}

impl OptimizeResult {
    /// Running minimum of validation loss along the history.
    pub fn best_so_far(&self) -> Vec<f64> {
        best_so_far(&self.history)
    }
}

pub fn best_so_far(history: &[Observation]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    history
        .iter()
        .map(|o| {
            best = best.min(o.val_loss);
            best
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct OptimizeOptions {
    pub space: SearchSpace,
    pub cache_dir: Option<std::path::PathBuf>,
}

pub fn optimize(pool: &CandidatePool, ds: &Dataset, budget: Budget, seed_: u64, cache_dir: Option<&Path>) -> Result<OptimizeResult> {
    let opts = OptimizeOptions {
        space: SearchSpace::default(),
        cache_dir: cache_dir.map(Path::to_path_buf),
    };
    optimize_with(pool, ds, budget, seed_, &opts)
}

/// The optimization loop. The default configuration is always evaluated
/// first; the time budget is checked only between evaluations.
pub fn optimize_with(
    pool: &CandidatePool,
    ds: &Dataset,
    budget: Budget,
    seed_: u64,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    opts.space.validate()?;
    pool.check_dataset(ds)?;
    let mut cache = match &opts.cache_dir {
        Some(dir) => Some(StackCache::open(dir)?),
        None => None,
    };
    let start = Instant::now();
    let mut rng = seed::rng(seed::derive_str(seed_, "optimize"));
    let mut history: Vec<Observation> = Vec::new();
    let mut best: Option<DeepStack> = None;
    loop {
        let exhausted = match budget {
            Budget::Iterations(n) => history.len() >= n,
            Budget::Seconds(s) => start.elapsed().as_secs_f64() >= s,
        };
        if exhausted {
            break;
        }
        let config = if history.is_empty() {
            EnsembleConfig::default()
        } else {
            suggest_next(&opts.space, &history, &mut rng)?
        };
        let t0 = Instant::now();
        let stack = build_deep_stack(&config, pool, ds, seed_, cache.as_mut())?;
        let obs = Observation {
            config,
            val_loss: stack.val_loss,
            wall_time: t0.elapsed().as_secs_f64(),
            cache_key: stack.cache_key.clone(),
        };
        log::info!("iteration {}: {} -> {:.6}", history.len(), config, obs.val_loss);
        history.push(obs);
        if best.as_ref().map_or(true, |b| stack.val_loss < b.val_loss) {
            best = Some(stack);
        }
    }
    let best_stack = best.ok_or_else(|| StackError::Budget(format!("budget {budget} allowed no evaluation")))?;
    Ok(OptimizeResult {
        best_config: best_stack.config,
        best_stack,
        history,
    })
}

/// One JSON object per line.
pub fn write_history_jsonl(path: &Path, history: &[Observation]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| StackError::io(path, e))?;
    for o in history {
        let line = serde_json::to_string(o)?;
        writeln!(f, "{line}").map_err(|e| StackError::io(path, e))?;
    }
    Ok(())
}

pub fn read_history_jsonl(path: &Path) -> Result<Vec<Observation>> {
    let text = std::fs::read_to_string(path).map_err(|e| StackError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(StackError::from))
        .collect()
}
