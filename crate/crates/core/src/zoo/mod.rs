//! A small family of learners behind one fit/predict interface. They build
//! the candidate pool and double as stacker and blender models.
//!
//! Hyperparameters and their ranges:
//!
//! | algorithm | parameter | valid range | pool sampling | default |
//! |---|---|---|---|---|
//! | Ridge | `alpha` | [0, 1000] | log-uniform [1e-4, 10] | 1.0 |
//! | Logistic | `l2` | [0, 10] | log-uniform [1e-4, 1] | 0.01 |
//! | Logistic | `epochs` | int [1, 2000] | int [50, 200] | 100 |
//! | KNearest | `k` | int [1, 50] | int [1, 15] | 5 |
//! | DecisionTree | `max_depth` | int [1, 12] | int [1, 8] | 4 |
//! | DecisionTree | `min_leaf` | int [1, 50] | int [1, 10] | 2 |
//! | RandomForestLite | `n_trees` | int [1, 200] | int [5, 20] | 10 |
//! | RandomForestLite | `max_depth` | int [1, 12] | int [2, 8] | 6 |
//! | RandomForestLite | `min_leaf` | int [1, 50] | int [1, 5] | 1 |
//! | GradientBoostedTrees | `rounds` | int [1, 1000] | int [10, 60] | 100 |
//! | GradientBoostedTrees | `max_depth` | int [1, 8] | int [1, 3] | 3 |
//! | GradientBoostedTrees | `learning_rate` | [0.001, 1] | log-uniform [0.03, 0.3] | 0.1 |
//! | GradientBoostedTrees | `min_leaf` | int [1, 50] | int [1, 5] | 1 |
//!
//! Classification probabilities: Ridge regresses one-hot targets and clips
//! onto the simplex; Logistic is softmax regression; KNearest returns
//! inverse-distance vote shares; trees return leaf class frequencies;
//! boosting uses a softmax over per-class additive scores.

mod ensemble;
mod knn;
mod linear;
pub mod pool;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{PredictionBlock, TaskKind};
use crate::error::{Result, StackError};
use crate::seed::Rng;

pub use pool::{build_pool, CandidatePool, PoolEntry, PoolMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    Ridge,
    Logistic,
    KNearest,
    DecisionTree,
    RandomForestLite,
    GradientBoostedTrees,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Ridge,
        Algorithm::Logistic,
        Algorithm::KNearest,
        Algorithm::DecisionTree,
        Algorithm::RandomForestLite,
        Algorithm::GradientBoostedTrees,
    ];

    pub fn supports(&self, kind: TaskKind) -> bool {
        !matches!((self, kind), (Algorithm::Logistic, TaskKind::Regression))
    }

    pub fn params(&self) -> &'static [ParamSpec] {
        match self {
            Algorithm::Ridge => RIDGE_PARAMS,
            Algorithm::Logistic => LOGISTIC_PARAMS,
            Algorithm::KNearest => KNN_PARAMS,
            Algorithm::DecisionTree => TREE_PARAMS,
            Algorithm::RandomForestLite => FOREST_PARAMS,
            Algorithm::GradientBoostedTrees => GBT_PARAMS,
        }
    }
}

use Sampling::{Int, LogUniform};

const RIDGE_PARAMS: &[ParamSpec] = &[ParamSpec::new("alpha", 0.0, 1000.0, LogUniform(1e-4, 10.0), 1.0)];
const LOGISTIC_PARAMS: &[ParamSpec] = &[
    ParamSpec::new("l2", 0.0, 10.0, LogUniform(1e-4, 1.0), 0.01),
    ParamSpec::new("epochs", 1.0, 2000.0, Int(50, 200), 100.0),
];
const KNN_PARAMS: &[ParamSpec] = &[ParamSpec::new("k", 1.0, 50.0, Int(1, 15), 5.0)];
const TREE_PARAMS: &[ParamSpec] = &[
    ParamSpec::new("max_depth", 1.0, 12.0, Int(1, 8), 4.0),
    ParamSpec::new("min_leaf", 1.0, 50.0, Int(1, 10), 2.0),
];
const FOREST_PARAMS: &[ParamSpec] = &[
    ParamSpec::new("n_trees", 1.0, 200.0, Int(5, 20), 10.0),
    ParamSpec::new("max_depth", 1.0, 12.0, Int(2, 8), 6.0),
    ParamSpec::new("min_leaf", 1.0, 50.0, Int(1, 5), 1.0),
];
const GBT_PARAMS: &[ParamSpec] = &[
    ParamSpec::new("rounds", 1.0, 1000.0, Int(10, 60), 100.0),
    ParamSpec::new("max_depth", 1.0, 8.0, Int(1, 3), 3.0),
    ParamSpec::new("learning_rate", 0.001, 1.0, LogUniform(0.03, 0.3), 0.1),
    ParamSpec::new("min_leaf", 1.0, 50.0, Int(1, 5), 1.0),
];

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Algorithm::Ridge => "ridge",
            Algorithm::Logistic => "logistic",
            Algorithm::KNearest => "knn",
            Algorithm::DecisionTree => "tree",
            Algorithm::RandomForestLite => "forest",
            Algorithm::GradientBoostedTrees => "gbt",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    LogUniform(f64, f64),
    Int(i64, i64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
    pub sampling: Sampling,
    pub default: f64,
}

impl ParamSpec {
    const fn new(name: &'static str, min: f64, max: f64, sampling: Sampling, default: f64) -> Self {
        ParamSpec {
            name,
            min,
            max,
            sampling,
            default,
        }
    }

    fn is_integer(&self) -> bool {
        matches!(self.sampling, Sampling::Int(..))
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        match self.sampling {
            Sampling::LogUniform(lo, hi) => (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp(),
            Sampling::Int(lo, hi) => rng.gen_range(lo..=hi) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl LearnerConfig {
    /// Config with every hyperparameter at its documented default.
    pub fn with_defaults(algorithm: Algorithm, seed: u64) -> Self {
        let params = algorithm
            .params()
            .iter()
            .map(|p| (p.name.to_string(), p.default))
            .collect();
        LearnerConfig {
            algorithm,
            params,
            seed,
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    /// Draws every hyperparameter from its pool sampling range.
    pub fn random(algorithm: Algorithm, rng: &mut Rng, seed: u64) -> Self {
        let params = algorithm
            .params()
            .iter()
            .map(|p| (p.name.to_string(), p.sample(rng)))
            .collect();
        LearnerConfig {
            algorithm,
            params,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let specs = self.algorithm.params();
        for (name, &v) in &self.params {
            let spec = specs.iter().find(|s| s.name == name).ok_or_else(|| {
                StackError::invalid(format!("{} has no hyperparameter {name:?}", self.algorithm))
            })?;
            if !(v >= spec.min && v <= spec.max) || (spec.is_integer() && v.fract() != 0.0) {
                return Err(StackError::invalid(format!(
                    "{}.{name} = {v} outside [{}, {}]",
                    self.algorithm, spec.min, spec.max
                )));
            }
        }
        Ok(())
    }

    fn get(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or_else(|| {
            self.algorithm
                .params()
                .iter()
                .find(|s| s.name == name)
                .map(|s| s.default)
                .expect("unknown hyperparameter")
        })
    }

    fn get_usize(&self, name: &str) -> usize {
        self.get(name) as usize
    }

    /// Short human-readable description, e.g. `gbt(rounds=30,max_depth=2)`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("{k}={}", fmt_param(*v)))
            .collect();
        format!("{}({})", self.algorithm, parts.join(","))
    }
}

fn fmt_param(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{}", v as i64)
    } else {
        format!("{v:.4}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) enum LearnerState {
    /// Emits the same row for every input.
    Constant(Vec<f64>),
    Linear(linear::RidgeModel),
    Logistic(linear::LogisticModel),
    Knn(knn::KnnModel),
    Tree(tree::Tree),
    Forest(Vec<tree::Tree>),
    Boosted(ensemble::BoostedModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLearner {
    config: LearnerConfig,
    kind: TaskKind,
    input_width: usize,
    state: LearnerState,
}

impl FittedLearner {
    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    /// True when fitting fell back to a constant predictor.
    pub fn is_constant(&self) -> bool {
        matches!(self.state, LearnerState::Constant(_))
    }
}

/// Fits `config` on `(x, y)`. Deterministic given `config.seed`.
///
/// A classification training set containing a single class yields a
/// constant predictor for that class, whatever the algorithm.
pub fn fit(config: &LearnerConfig, x: &Array2<f64>, y: &[f64], kind: TaskKind) -> Result<FittedLearner> {
    config.validate()?;
    if x.nrows() != y.len() {
        return Err(StackError::shape(format!(
            "{} feature rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(StackError::invalid("cannot fit on zero rows"));
    }
    if !config.algorithm.supports(kind) {
        return Err(StackError::invalid(format!(
            "{} does not support {kind:?}",
            config.algorithm
        )));
    }
    let targets = crate::loss::target_matrix(y, kind)?;

    if kind.is_classification() && y.iter().all(|&v| v == y[0]) {
        return Ok(FittedLearner {
            config: config.clone(),
            kind,
            input_width: x.ncols(),
            state: LearnerState::Constant(targets.row(0).to_vec()),
        });
    }

    let mut rng = crate::seed::rng(config.seed);
    let state = match config.algorithm {
        Algorithm::Ridge => LearnerState::Linear(linear::RidgeModel::fit(x, &targets, config.get("alpha"))?),
        Algorithm::Logistic => LearnerState::Logistic(linear::LogisticModel::fit(
            x,
            &targets,
            config.get("l2"),
            config.get_usize("epochs"),
        )),
        Algorithm::KNearest => LearnerState::Knn(knn::KnnModel::fit(x, &targets, config.get_usize("k"))),
        Algorithm::DecisionTree => {
            let rows: Vec<usize> = (0..x.nrows()).collect();
            let params = tree::TreeParams {
                max_depth: config.get_usize("max_depth"),
                min_leaf: config.get_usize("min_leaf"),
                max_features: None,
            };
            LearnerState::Tree(tree::build(x, &targets, &rows, params, &mut rng, &tree::mean_leaf(&targets)))
        }
        Algorithm::RandomForestLite => LearnerState::Forest(ensemble::fit_forest(
            x,
            &targets,
            config.get_usize("n_trees"),
            config.get_usize("max_depth"),
            config.get_usize("min_leaf"),
            &mut rng,
        )),
        Algorithm::GradientBoostedTrees => LearnerState::Boosted(ensemble::BoostedModel::fit(
            x,
            &targets,
            kind.is_classification(),
            ensemble::BoostParams {
                rounds: config.get_usize("rounds"),
                max_depth: config.get_usize("max_depth"),
                learning_rate: config.get("learning_rate"),
                min_leaf: config.get_usize("min_leaf"),
            },
            &mut rng,
        )),
    };
    Ok(FittedLearner {
        config: config.clone(),
        kind,
        input_width: x.ncols(),
        state,
    })
}

pub fn predict(learner: &FittedLearner, x: &Array2<f64>) -> Result<PredictionBlock> {
    if x.ncols() != learner.input_width {
        return Err(StackError::shape(format!(
            "learner expects {} features, got {}",
            learner.input_width,
            x.ncols()
        )));
    }
    let width = learner.kind.width();
    let n = x.nrows();
    let mut raw = match &learner.state {
        LearnerState::Constant(row) => Array2::from_shape_fn((n, width), |(_, j)| row[j]),
        LearnerState::Linear(m) => m.predict(x),
        LearnerState::Logistic(m) => m.predict(x),
        LearnerState::Knn(m) => m.predict(x),
        LearnerState::Tree(t) => {
            let mut out = Array2::zeros((n, width));
            for (i, row) in x.outer_iter().enumerate() {
                for (j, v) in t.predict_row(row).iter().enumerate() {
                    out[[i, j]] = *v;
                }
            }
            out
        }
        LearnerState::Forest(trees) => ensemble::predict_forest(trees, x, width),
        LearnerState::Boosted(m) => m.predict(x),
    };
    if learner.kind.is_classification() {
        project_to_simplex(&mut raw);
    }
    Ok(PredictionBlock::from_array(raw))
}

/// Clips negatives and renormalizes each row; an all-zero row becomes uniform.
pub(crate) fn project_to_simplex(values: &mut Array2<f64>) {
    let width = values.ncols() as f64;
    for mut row in values.axis_iter_mut(Axis(0)) {
        row.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
        let s = row.sum();
        if s > 0.0 && s.is_finite() {
            row /= s;
        } else {
            row.fill(1.0 / width);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::array;

    fn cls2() -> TaskKind {
        TaskKind::classification(2).unwrap()
    }

    fn noisy_cls(n: usize, seed_: u64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = seed::rng(seed_);
        let x = Array2::from_shape_fn((n, 3), |_| rng.gen::<f64>() * 2.0 - 1.0);
        let y = x
            .outer_iter()
            .map(|r| if r[0] + 0.5 * r[1] > 0.0 { 1.0 } else { 0.0 })
            .collect();
        (x, y)
    }

    #[test]
    fn ridge_exact_line() {
        let cfg = LearnerConfig::with_defaults(Algorithm::Ridge, 0).with_param("alpha", 0.0);
        let m = fit(&cfg, &array![[1.0], [2.0]], &[1.0, 2.0], TaskKind::Regression).unwrap();
        let p = predict(&m, &array![[3.0]]).unwrap();
        assert!((p.values()[[0, 0]] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ridge_constant_target() {
        let cfg = LearnerConfig::with_defaults(Algorithm::Ridge, 0);
        let x = array![[0.1, 2.0], [1.0, -1.0], [3.0, 0.5]];
        let m = fit(&cfg, &x, &[2.5, 2.5, 2.5], TaskKind::Regression).unwrap();
        let p = predict(&m, &array![[9.0, 9.0], [-4.0, 0.0]]).unwrap();
        assert!(p.values().iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn knn_one_recovers_training_labels() {
        let (x, y) = noisy_cls(40, 3);
        let cfg = LearnerConfig::with_defaults(Algorithm::KNearest, 0).with_param("k", 1.0);
        let m = fit(&cfg, &x, &y, cls2()).unwrap();
        let p = predict(&m, &x).unwrap();
        for (row, &label) in p.values().outer_iter().zip(&y) {
            assert_eq!(row[label as usize], 1.0);
        }
    }

    #[test]
    fn single_class_falls_back_to_constant() {
        let x = array![[0.0], [1.0], [2.0]];
        for alg in [Algorithm::Logistic, Algorithm::GradientBoostedTrees, Algorithm::KNearest] {
            let m = fit(&LearnerConfig::with_defaults(alg, 0), &x, &[1.0, 1.0, 1.0], cls2()).unwrap();
            assert!(m.is_constant());
            let p = predict(&m, &array![[5.0], [-3.0]]).unwrap();
            assert_eq!(p.values(), &array![[0.0, 1.0], [0.0, 1.0]]);
        }
    }

    #[test]
    fn classification_rows_are_distributions() {
        let (x, y) = noisy_cls(60, 9);
        let mut rng = seed::rng(4);
        let probe = Array2::from_shape_fn((25, 3), |_| rng.gen::<f64>() * 6.0 - 3.0);
        for alg in Algorithm::ALL {
            for s in 0..3 {
                let cfg = LearnerConfig::random(alg, &mut rng, s);
                let m = fit(&cfg, &x, &y, cls2()).unwrap();
                let p = predict(&m, &probe).unwrap();
                assert!(PredictionBlock::checked(p.into_inner(), cls2()).is_ok(), "{}", cfg.label());
            }
        }
    }

    #[test]
    fn gbt_fits_a_parabola() {
        let x = Array2::from_shape_fn((100, 1), |(i, _)| -1.0 + 2.0 * i as f64 / 99.0);
        let y: Vec<f64> = x.column(0).iter().map(|v| v * v).collect();
        let cfg = LearnerConfig::with_defaults(Algorithm::GradientBoostedTrees, 0)
            .with_param("rounds", 50.0)
            .with_param("max_depth", 3.0);
        let m = fit(&cfg, &x, &y, TaskKind::Regression).unwrap();
        let p = predict(&m, &x).unwrap();
        let mse = crate::loss::squared_error_loss(&p, &y, TaskKind::Regression).unwrap();
        assert!(mse < 0.01, "train mse {mse}");
    }

    #[test]
    fn fit_is_deterministic() {
        let (x, y) = noisy_cls(50, 1);
        let mut rng = seed::rng(11);
        for alg in Algorithm::ALL {
            let cfg = LearnerConfig::random(alg, &mut rng, 42);
            let a = predict(&fit(&cfg, &x, &y, cls2()).unwrap(), &x).unwrap();
            let b = predict(&fit(&cfg, &x, &y, cls2()).unwrap(), &x).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn errors() {
        let x = array![[0.0], [1.0]];
        let cfg = LearnerConfig::with_defaults(Algorithm::Ridge, 0);
        assert!(fit(&cfg, &x, &[1.0], TaskKind::Regression).is_err());
        assert!(fit(&cfg, &Array2::zeros((0, 1)), &[], TaskKind::Regression).is_err());
        let logistic = LearnerConfig::with_defaults(Algorithm::Logistic, 0);
        assert!(fit(&logistic, &x, &[0.0, 1.0], TaskKind::Regression).is_err());
        let bad = cfg.clone().with_param("alpha", -1.0);
        assert!(fit(&bad, &x, &[0.0, 1.0], TaskKind::Regression).is_err());
        let m = fit(&cfg, &x, &[0.0, 1.0], TaskKind::Regression).unwrap();
        assert!(predict(&m, &array![[0.0, 1.0]]).is_err());
    }
}
