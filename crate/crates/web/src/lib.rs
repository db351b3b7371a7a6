//! WebAssembly bindings for the browser demo. Each exported function takes
//! plain numbers and returns a JSON string; the `*_json` functions hold the
//! logic so they can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use stackopt::bench::{experiment_dropout_weights, experiment_theorem1};
use stackopt::data::Part;
use stackopt::subset::{
    brute_force_select, build_error_covariance, select_from_covariance, solve_relaxation, weight_matrix,
    SelectOptions, SubsetSelection, MAX_OMEGA,
};
use stackopt::synth;
use stackopt::zoo::build_pool;

/// Upper bound on the explorer's pool so exact enumeration stays instant.
pub const MAX_EXPLORER_MODELS: usize = 16;

type Out = Result<String, String>;

fn to_json<T: Serialize>(value: &T) -> Out {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Explorer {
    models: Vec<String>,
    val_loss: Vec<f64>,
    g_tilde: Vec<Vec<f64>>,
    diag_z: Vec<f64>,
    relaxed: SubsetSelection,
    exact: SubsetSelection,
}

/// Fits a small random pool on a synthetic regression task and compares
/// relaxation-plus-rounding against exact enumeration.
pub fn explore_subset_json(models: usize, size: usize, omega: f64, seed: u64) -> Out {
    if !(5..=MAX_EXPLORER_MODELS).contains(&models) {
        return Err(format!("models must lie in 5..={MAX_EXPLORER_MODELS}"));
    }
    if size == 0 || size > models {
        return Err(format!("size must lie in 1..={models}"));
    }
    if !(0.0..=MAX_OMEGA).contains(&omega) {
        return Err(format!("diversity weight {omega} outside [0, {MAX_OMEGA}]"));
    }
    let err = |e: stackopt::StackError| e.to_string();
    let ds = synth::regression_task(160, 3, 0.5, seed).map_err(err)?;
    let pool = build_pool(&ds, models, seed).map_err(err)?;
    let g = build_error_covariance(&pool, &ds.y(Part::Val), ds.kind()).map_err(err)?;
    let wc = weight_matrix(&g, omega).map_err(err)?;
    let z = solve_relaxation(&wc, size, seed).map_err(err)?.z;
    let relaxed = select_from_covariance(&wc, size, seed, SelectOptions { brute_force_limit: 0 }).map_err(err)?;
    let exact = brute_force_select(&wc, size).map_err(err)?;
    to_json(&Explorer {
        models: pool.entries.iter().map(|e| e.config.label()).collect(),
        val_loss: pool.entries.iter().map(|e| e.val_loss).collect(),
        g_tilde: wc.g_tilde.outer_iter().map(|r| r.to_vec()).collect(),
        diag_z: z.diag().to_vec(),
        relaxed,
        exact,
    })
}

/// Monte Carlo weight shrinkage of masked least squares on the default grid.
pub fn shrinkage_curve_json(features: usize, samplings: usize, seed: u64) -> Out {
    let report = experiment_theorem1(features, &stackopt::bench::DEFAULT_GAMMA_GRID, samplings, seed)
        .map_err(|e| e.to_string())?;
    to_json(&report)
}

/// Largest ES weight share per dropout rate on a task with one dominant
/// feature.
pub fn dropout_weights_json(samples: usize, seeds: u64, seed: u64) -> Out {
    let err = |e: stackopt::StackError| e.to_string();
    let ds = synth::dominating_feature_task(samples, 4, 0.3, seed).map_err(err)?;
    let pool = build_pool(&ds, 40, seed).map_err(err)?;
    let seeds: Vec<u64> = (seed..seed + seeds.max(1)).collect();
    let rows = experiment_dropout_weights(&pool, &ds, &stackopt::bench::DEFAULT_GAMMA_GRID, &seeds).map_err(err)?;
    to_json(&rows)
}

#[wasm_bindgen]
pub fn explore_subset(models: usize, size: usize, omega: f64, seed: u32) -> Result<String, JsValue> {
    explore_subset_json(models, size, omega, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn shrinkage_curve(features: usize, samplings: usize, seed: u32) -> Result<String, JsValue> {
    shrinkage_curve_json(features, samplings, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn dropout_weights(samples: usize, seeds: u32, seed: u32) -> Result<String, JsValue> {
    dropout_weights_json(samples, seeds.into(), seed.into()).map_err(|e| JsValue::from_str(&e))
}
