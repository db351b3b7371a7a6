use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::dropout::{compute_dropout_rates, sample_mask};
use crate::data::{PredictionBlock, TaskKind};
use crate::error::{Result, StackError};
use crate::linalg::{ridge, LinearFit};
use crate::loss::{squared_error_loss, target_matrix};
use crate::seed;
use crate::zoo::{fit, predict, project_to_simplex, Algorithm, FittedLearner, LearnerConfig};

pub const ES_ROUNDS: usize = 25;
pub const BLENDER_REPEATS: usize = 5;
pub const LINEAR_DAMPING: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlenderKind {
    #[serde(rename = "es")]
    EnsembleSelection,
    Linear,
    Gbt,
}

impl BlenderKind {
    pub const ALL: [BlenderKind; 3] = [BlenderKind::EnsembleSelection, BlenderKind::Linear, BlenderKind::Gbt];

    pub fn name(&self) -> &'static str {
        match self {
            BlenderKind::EnsembleSelection => "es",
            BlenderKind::Linear => "linear",
            BlenderKind::Gbt => "gbt",
        }
    }
}

impl std::str::FromStr for BlenderKind {
    type Err = StackError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "es" => Ok(BlenderKind::EnsembleSelection),
            "linear" => Ok(BlenderKind::Linear),
            "gbt" => Ok(BlenderKind::Gbt),
            other => Err(StackError::invalid(format!("unknown blender {other:?}"))),
        }
    }
}

/// Greedy forward selection with replacement: each round adds the feature
/// whose inclusion minimizes the squared-error loss of the running average,
/// lowest index on ties. Weights are selection counts over `rounds`.
pub fn fit_ensemble_selection(
    features: &[&PredictionBlock],
    labels: &[f64],
    kind: TaskKind,
    rounds: usize,
) -> Result<Vec<f64>> {
    if features.is_empty() {
        return Err(StackError::invalid("ensemble selection needs at least one feature"));
    }
    if rounds == 0 {
        return Err(StackError::invalid("ensemble selection needs at least one round"));
    }
    let target = target_matrix(labels, kind)?;
    for f in features {
        if f.values().dim() != target.dim() {
            return Err(StackError::shape("feature block does not match the labels"));
        }
    }
    let mut sum = Array2::<f64>::zeros(target.raw_dim());
    let mut counts = vec![0usize; features.len()];
    for t in 1..=rounds {
        let mut best = (f64::INFINITY, 0);
        for (i, f) in features.iter().enumerate() {
            let mut loss = 0.0;
            for ((s, p), y) in sum.iter().zip(f.values().iter()).zip(target.iter()) {
                let d = y - (s + p) / t as f64;
                loss += d * d;
            }
            if loss < best.0 {
                best = (loss, i);
            }
        }
        sum += features[best.1].values();
        counts[best.1] += 1;
    }
    Ok(counts.into_iter().map(|c| c as f64 / rounds as f64).collect())
}

fn es_predict(weights: &[f64], features: &[&PredictionBlock]) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros(features[0].values().raw_dim());
    for (w, f) in weights.iter().zip(features) {
        if *w != 0.0 {
            out.scaled_add(*w, f.values());
        }
    }
    out
}

fn concat(features: &[&PredictionBlock]) -> Result<Array2<f64>> {
    let views: Vec<ArrayView2<'_, f64>> = features.iter().map(|f| f.values().view()).collect();
    concatenate(Axis(1), &views).map_err(|e| StackError::shape(e.to_string()))
}

/// Damped least squares on the concatenated feature columns, with an
/// intercept. Classification regresses one-hot targets.
pub fn fit_linear_blender(features: &[&PredictionBlock], labels: &[f64], kind: TaskKind) -> Result<LinearFit> {
    if features.is_empty() {
        return Err(StackError::invalid("linear blender needs at least one feature"));
    }
    ridge(&concat(features)?, &target_matrix(labels, kind)?, LINEAR_DAMPING)
}

/// Linear blender output; classification rows are clipped at zero and
/// renormalized.
pub fn linear_blend(fit: &LinearFit, features: &[&PredictionBlock], kind: TaskKind) -> Result<Array2<f64>> {
    let mut out = fit.predict(&concat(features)?);
    if kind.is_classification() {
        project_to_simplex(&mut out);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BlenderState {
    /// Full-width weights; dropped features carry 0.
    Es(Vec<f64>),
    /// Fit over the kept features only.
    Linear(LinearFit),
    Gbt(FittedLearner),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlenderRepeat {
    /// `true` marks a dropped feature.
    pub mask: Vec<bool>,
    pub state: BlenderState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blender {
    pub kind: BlenderKind,
    pub task: TaskKind,
    pub repeats: Vec<BlenderRepeat>,
}

fn kept<'a>(features: &[&'a PredictionBlock], mask: &[bool]) -> Vec<&'a PredictionBlock> {
    features
        .iter()
        .zip(mask)
        .filter(|(_, &d)| !d)
        .map(|(f, _)| *f)
        .collect()
}

fn gbt_blender_config(seed_: u64) -> LearnerConfig {
    LearnerConfig::with_defaults(Algorithm::GradientBoostedTrees, seed_)
}

fn fit_repeat(
    kind: BlenderKind,
    features: &[&PredictionBlock],
    mask: &[bool],
    labels: &[f64],
    task: TaskKind,
    seed_: u64,
) -> Result<BlenderState> {
    let chosen = kept(features, mask);
    Ok(match kind {
        BlenderKind::EnsembleSelection => {
            let w = fit_ensemble_selection(&chosen, labels, task, ES_ROUNDS)?;
            let mut full = vec![0.0; features.len()];
            let mut it = w.into_iter();
            for (slot, &d) in full.iter_mut().zip(mask) {
                if !d {
                    *slot = it.next().unwrap_or(0.0);
                }
            }
            BlenderState::Es(full)
        }
        BlenderKind::Linear => BlenderState::Linear(fit_linear_blender(&chosen, labels, task)?),
        BlenderKind::Gbt => BlenderState::Gbt(fit(&gbt_blender_config(seed_), &concat(&chosen)?, labels, task)?),
    })
}

/// Fits `repeats` blenders on the final layer's OOF train features, each
/// under its own dropout mask, and averages their outputs at prediction.
pub fn fit_blender(
    kind: BlenderKind,
    train_features: &[&PredictionBlock],
    train_labels: &[f64],
    task: TaskKind,
    gamma0: f64,
    repeats: usize,
    seed_: u64,
) -> Result<Blender> {
    if repeats == 0 {
        return Err(StackError::invalid("blender needs at least one repeat"));
    }
    let rates = compute_dropout_rates(train_features, train_labels, task, gamma0)?;
    let mut rng = seed::rng(seed::derive_str(seed_, "masks"));
    let masks: Vec<Vec<bool>> = (0..repeats).map(|_| sample_mask(&rates, &mut rng)).collect();
    let mut out: Vec<BlenderRepeat> = Vec::with_capacity(repeats);
    for mask in masks {
        // An identical mask gives an identical fit.
        let state = match out.iter().find(|p| p.mask == mask) {
            Some(p) => p.state.clone(),
            None => fit_repeat(kind, train_features, &mask, train_labels, task, seed_)?,
        };
        out.push(BlenderRepeat { mask, state });
    }
    Ok(Blender {
        kind,
        task,
        repeats: out,
    })
}

impl Blender {
    pub fn predict(&self, features: &[&PredictionBlock]) -> Result<PredictionBlock> {
        let first = features
            .first()
            .ok_or_else(|| StackError::invalid("blender got no features"))?;
        let mut acc = Array2::<f64>::zeros((first.rows(), self.task.width()));
        for rep in &self.repeats {
            if rep.mask.len() != features.len() {
                return Err(StackError::shape("blender feature count changed since fitting"));
            }
            let out = match &rep.state {
                BlenderState::Es(w) => es_predict(w, features),
                BlenderState::Linear(f) => linear_blend(f, &kept(features, &rep.mask), self.task)?,
                BlenderState::Gbt(m) => predict(m, &concat(&kept(features, &rep.mask))?)?.into_inner(),
            };
            acc += &out;
        }
        acc /= self.repeats.len() as f64;
        Ok(PredictionBlock::from_array(acc))
    }

    /// Mean ES weight vector across repeats.
    pub fn es_average_weights(&self) -> Option<Vec<f64>> {
        let mut acc: Option<Vec<f64>> = None;
        for rep in &self.repeats {
            let BlenderState::Es(w) = &rep.state else {
                return None;
            };
            let a = acc.get_or_insert_with(|| vec![0.0; w.len()]);
            for (s, v) in a.iter_mut().zip(w) {
                *s += v;
            }
        }
        acc.map(|a| a.into_iter().map(|s| s / self.repeats.len() as f64).collect())
    }

    /// Squared-error loss of the blended output.
    pub fn loss(&self, features: &[&PredictionBlock], labels: &[f64]) -> Result<f64> {
        squared_error_loss(&self.predict(features)?, labels, self.task)
    }
}
