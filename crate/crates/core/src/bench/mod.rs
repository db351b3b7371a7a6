//! Fixed-strategy baselines, benchmark reports and diagnostic experiments.

pub mod experiments;
pub mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, split_dataset, Dataset, Part, PredictionBlock, Schema};
use crate::error::{Result, StackError};
use crate::loss::task_metric;
use crate::opt::{optimize, Budget};
use crate::seed;
use crate::stack::{build_on_subset, fit_ensemble_selection, predict_stack, BlenderKind, EnsembleConfig};
use crate::subset::fixed_subset;
use crate::synth;
use crate::zoo::{build_pool, predict, Algorithm, CandidatePool};

pub use experiments::{
    experiment_dropout_weights, experiment_layer_improvement, experiment_overfitting_gap, experiment_theorem1,
    DEFAULT_GAMMA_GRID,
};
pub use stats::{average_rank, normalized_improvement, rank_with_ties, spearman, wilcoxon_signed_rank};

/// Rounds of the pool-level ensemble selection baseline.
pub const ES_ONLY_ROUNDS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineSelection {
    /// The whole pool, unclamped.
    All,
    /// The lowest-validation-loss entry of each algorithm.
    Best,
    SingleBest,
    #[serde(rename = "es_only")]
    EsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineBlender {
    Es,
    Linear,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineStrategy {
    pub name: String,
    pub selection: BaselineSelection,
    pub layers: usize,
    pub blender: BaselineBlender,
}

impl BaselineStrategy {
    pub fn single_best() -> Self {
        BaselineStrategy {
            name: "single-best".into(),
            selection: BaselineSelection::SingleBest,
            layers: 0,
            blender: BaselineBlender::None,
        }
    }

    pub fn es_only() -> Self {
        BaselineStrategy {
            name: "es25".into(),
            selection: BaselineSelection::EsOnly,
            layers: 0,
            blender: BaselineBlender::Es,
        }
    }

    /// `all-linear-l1`, `best-es-l2` and so on.
    pub fn stacked(selection: BaselineSelection, blender: BaselineBlender, layers: usize) -> Result<Self> {
        let sel = match selection {
            BaselineSelection::All => "all",
            BaselineSelection::Best => "best",
            _ => return Err(StackError::invalid("stacked baselines select all or best")),
        };
        let bl = match blender {
            BaselineBlender::Es => "es",
            BaselineBlender::Linear => "linear",
            BaselineBlender::None => return Err(StackError::invalid("stacked baselines need a blender")),
        };
        if !(1..=2).contains(&layers) {
            return Err(StackError::invalid(format!("stacked baselines use 1 or 2 layers, got {layers}")));
        }
        Ok(BaselineStrategy {
            name: format!("{sel}-{bl}-l{layers}"),
            selection,
            layers,
            blender,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.selection {
            BaselineSelection::SingleBest => self.layers == 0 && self.blender == BaselineBlender::None,
            BaselineSelection::EsOnly => self.layers == 0 && self.blender == BaselineBlender::Es,
            BaselineSelection::All | BaselineSelection::Best => {
                (1..=2).contains(&self.layers) && self.blender != BaselineBlender::None
            }
        };
        if ok {
            Ok(())
        } else {
            Err(StackError::invalid(format!("inconsistent baseline strategy {:?}", self.name)))
        }
    }
}

impl FromStr for BaselineStrategy {
    type Err = StackError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "single-best" => return Ok(Self::single_best()),
            "es25" => return Ok(Self::es_only()),
            _ => {}
        }
        let parts: Vec<&str> = s.split('-').collect();
        let bad = || StackError::invalid(format!("unknown baseline strategy {s:?}"));
        let [sel, bl, layers] = parts[..] else {
            return Err(bad());
        };
        let selection = match sel {
            "all" => BaselineSelection::All,
            "best" => BaselineSelection::Best,
            _ => return Err(bad()),
        };
        let blender = match bl {
            "es" => BaselineBlender::Es,
            "linear" => BaselineBlender::Linear,
            _ => return Err(bad()),
        };
        let layers = match layers {
            "l1" => 1,
            "l2" => 2,
            _ => return Err(bad()),
        };
        Self::stacked(selection, blender, layers)
    }
}

/// Index of the lowest validation loss, lowest index on ties.
pub fn single_best_index(pool: &CandidatePool) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in pool.entries.iter().enumerate() {
        if best.map_or(true, |b| e.val_loss < pool.entries[b].val_loss) {
            best = Some(i);
        }
    }
    best.ok_or_else(|| StackError::invalid("the pool is empty"))
}

/// One entry per algorithm present in the pool, in pool order.
pub fn best_per_algorithm(pool: &CandidatePool) -> Vec<usize> {
    let mut best: BTreeMap<Algorithm, usize> = BTreeMap::new();
    for (i, e) in pool.entries.iter().enumerate() {
        let slot = best.entry(e.config.algorithm).or_insert(i);
        if e.val_loss < pool.entries[*slot].val_loss {
            *slot = i;
        }
    }
    let mut out: Vec<usize> = best.into_values().collect();
    out.sort_unstable();
    out
}

fn refit_predict(pool: &CandidatePool, index: usize, ds: &Dataset) -> Result<PredictionBlock> {
    predict(&pool.refit(index, ds)?, &ds.x(Part::Test))
}

/// Test-split predictions of a baseline.
pub fn baseline_test_predictions(
    strategy: &BaselineStrategy,
    pool: &CandidatePool,
    ds: &Dataset,
    seed_: u64,
) -> Result<PredictionBlock> {
    strategy.validate()?;
    pool.check_dataset(ds)?;
    match strategy.selection {
        BaselineSelection::SingleBest => refit_predict(pool, single_best_index(pool)?, ds),
        BaselineSelection::EsOnly => {
            let weights = fit_ensemble_selection(&pool.val_preds(), &ds.y(Part::Val), ds.kind(), ES_ONLY_ROUNDS)?;
            let mut acc: Option<ndarray::Array2<f64>> = None;
            for (i, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let p = refit_predict(pool, i, ds)?;
                match acc.as_mut() {
                    Some(a) => a.scaled_add(w, p.values()),
                    None => acc = Some(p.into_inner() * w),
                }
            }
            Ok(PredictionBlock::from_array(acc.expect("ensemble selection picks at least one model")))
        }
        BaselineSelection::All | BaselineSelection::Best => {
            let indices = if strategy.selection == BaselineSelection::All {
                (0..pool.len()).collect()
            } else {
                best_per_algorithm(pool)
            };
            let subset = fixed_subset(pool, &ds.y(Part::Val), indices)?;
            let config = EnsembleConfig {
                ensemble_size: subset.size,
                diversity_weight: 0.0,
                num_layers: strategy.layers,
                blender: match strategy.blender {
                    BaselineBlender::Es => BlenderKind::EnsembleSelection,
                    _ => BlenderKind::Linear,
                },
                dropout_rate: 0.0,
                retain: false,
            };
            let stack = build_on_subset(&config, subset, pool, ds, seed_, None)?;
            predict_stack(&stack, &ds.x(Part::Test))
        }
    }
}

/// Test loss (error rate or MSE) of a baseline.
pub fn run_baseline(strategy: &BaselineStrategy, pool: &CandidatePool, ds: &Dataset, seed_: u64) -> Result<f64> {
    let pred = baseline_test_predictions(strategy, pool, ds, seed_)?;
    task_metric(&pred, &ds.y(Part::Test), ds.kind())
}

/// A column of the benchmark table.
#[derive(Debug, Clone, PartialEq)]
pub enum BenchMethod {
    Baseline(BaselineStrategy),
    /// The optimizer with an iteration budget.
    Pseo(usize),
}

impl BenchMethod {
    pub fn name(&self) -> String {
        match self {
            BenchMethod::Baseline(s) => s.name.clone(),
            BenchMethod::Pseo(n) => format!("pseo-{n}"),
        }
    }

    /// Single-Best, ES25, the eight All/Best stacks, PSEO-5 and PSEO-25.
    pub fn standard_grid() -> Vec<BenchMethod> {
        let mut out = vec![
            BenchMethod::Baseline(BaselineStrategy::single_best()),
            BenchMethod::Baseline(BaselineStrategy::es_only()),
        ];
        for sel in [BaselineSelection::All, BaselineSelection::Best] {
            for layers in [1, 2] {
                for bl in [BaselineBlender::Es, BaselineBlender::Linear] {
                    out.push(BenchMethod::Baseline(BaselineStrategy::stacked(sel, bl, layers).unwrap()));
                }
            }
        }
        out.push(BenchMethod::Pseo(5));
        out.push(BenchMethod::Pseo(25));
        out
    }

    pub fn test_loss(&self, pool: &CandidatePool, ds: &Dataset, seed_: u64) -> Result<f64> {
        match self {
            BenchMethod::Baseline(s) => run_baseline(s, pool, ds, seed_),
            BenchMethod::Pseo(n) => {
                let r = optimize(pool, ds, Budget::Iterations(*n), seed_, None)?;
                let pred = predict_stack(&r.best_stack, &ds.x(Part::Test))?;
                task_metric(&pred, &ds.y(Part::Test), ds.kind())
            }
        }
    }
}

impl FromStr for BenchMethod {
    type Err = StackError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if let Some(n) = t.strip_prefix("pseo-") {
            let n: usize = n
                .parse()
                .map_err(|_| StackError::invalid(format!("bad optimizer budget in {s:?}")))?;
            return Ok(BenchMethod::Pseo(n));
        }
        t.parse().map(BenchMethod::Baseline)
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Where a benchmark dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    Csv { data: PathBuf, schema: PathBuf },
    Regression { n: usize, d: usize, noise: f64 },
    Linear { n: usize, d: usize, noise: f64 },
    Classification { n: usize, d: usize, classes: usize, noise: f64 },
    DominatingFeature { n: usize, d: usize, noise: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    #[serde(flatten)]
    pub source: DatasetSource,
    #[serde(default)]
    pub seed: u64,
}

impl DatasetEntry {
    /// Loads or generates the dataset, split 60/20/20. Relative CSV paths
    /// resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        let s = self.seed;
        match &self.source {
            DatasetSource::Csv { data, schema } => {
                let schema = Schema::from_json_file(&base.join(schema))?;
                let ds = load_csv(&base.join(data), &schema)?;
                split_dataset(&ds, synth::DEFAULT_FRACTIONS, s)
            }
            DatasetSource::Regression { n, d, noise } => synth::regression_task(*n, *d, *noise, s),
            DatasetSource::Linear { n, d, noise } => synth::linear_task(*n, *d, *noise, s),
            DatasetSource::Classification { n, d, classes, noise } => {
                synth::classification_task(*n, *d, *classes, *noise, s)
            }
            DatasetSource::DominatingFeature { n, d, noise } => synth::dominating_feature_task(*n, *d, *noise, s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchManifest {
    pub datasets: Vec<DatasetEntry>,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_pool_size() -> usize {
    40
}

impl BenchManifest {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| StackError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetResult {
    pub name: String,
    pub kind: String,
    /// Test loss per method, in report method order.
    pub losses: Vec<f64>,
    pub ranks: Vec<f64>,
    pub normalized_improvement: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub a: String,
    pub b: String,
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub methods: Vec<String>,
    pub datasets: Vec<DatasetResult>,
    pub average_rank: Vec<f64>,
    pub average_rank_by_kind: BTreeMap<String, Vec<f64>>,
    /// Mean normalized improvement per method; present when Single-Best ran.
    pub mean_normalized_improvement: Option<Vec<f64>>,
    pub wilcoxon: Vec<PairTest>,
}

fn kind_name(ds: &Dataset) -> String {
    if ds.kind().is_classification() {
        "classification".into()
    } else {
        "regression".into()
    }
}

/// Assembles a report from a dataset × method loss table. The signed-rank
/// tests pair the last optimizer method (if any) with every other method.
pub fn build_report(methods: &[String], names: &[String], kinds: &[String], losses: &[Vec<f64>]) -> Result<BenchReport> {
    if names.len() != losses.len() || kinds.len() != losses.len() {
        return Err(StackError::shape("dataset names, kinds and loss rows differ in length"));
    }
    let average = average_rank(losses)?;
    let sb = methods.iter().position(|m| m == "single-best");
    let mut datasets = Vec::with_capacity(losses.len());
    let mut ni_acc: Option<Vec<f64>> = sb.map(|_| vec![0.0; methods.len()]);
    for ((name, kind), row) in names.iter().zip(kinds).zip(losses) {
        let ni = match sb {
            Some(i) => Some(normalized_improvement(row, i)?),
            None => None,
        };
        if let (Some(acc), Some(v)) = (ni_acc.as_mut(), ni.as_ref()) {
            acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        datasets.push(DatasetResult {
            name: name.clone(),
            kind: kind.clone(),
            losses: row.clone(),
            ranks: rank_with_ties(row),
            normalized_improvement: ni,
        });
    }
    let n = losses.len().max(1) as f64;
    let mean_ni = ni_acc.map(|a| a.into_iter().map(|v| v / n).collect());

    let mut by_kind: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (kind, row) in kinds.iter().zip(losses) {
        by_kind.entry(kind.clone()).or_default().push(row.clone());
    }
    let average_rank_by_kind = by_kind
        .into_iter()
        .map(|(k, rows)| average_rank(&rows).map(|r| (k, r)))
        .collect::<Result<_>>()?;

    let mut wilcoxon = Vec::new();
    if let Some(a) = methods.iter().rposition(|m| m.starts_with("pseo-")) {
        for (b, name) in methods.iter().enumerate() {
            if b == a {
                continue;
            }
            let diffs: Vec<f64> = losses.iter().map(|r| r[b] - r[a]).collect();
            let (p_value, note) = match wilcoxon_signed_rank(&diffs) {
                Ok(p) => (Some(p), None),
                Err(e) => (None, Some(e.to_string())),
            };
            wilcoxon.push(PairTest {
                a: methods[a].clone(),
                b: name.clone(),
                p_value,
                note,
            });
        }
    }
    Ok(BenchReport {
        methods: methods.to_vec(),
        datasets,
        average_rank: average,
        average_rank_by_kind,
        mean_normalized_improvement: mean_ni,
        wilcoxon,
    })
}

/// Builds a pool per dataset and runs every method on it.
pub fn run_bench(datasets: &[(String, Dataset)], methods: &[BenchMethod], pool_size: usize, seed_: u64) -> Result<BenchReport> {
    if methods.is_empty() || datasets.is_empty() {
        return Err(StackError::invalid("a benchmark needs at least one dataset and one method"));
    }
    let mut losses = Vec::with_capacity(datasets.len());
    for (d, (name, ds)) in datasets.iter().enumerate() {
        let ds_seed = seed::derive(seed_, d as u64);
        let pool = build_pool(ds, pool_size, ds_seed)?;
        let mut row = Vec::with_capacity(methods.len());
        for m in methods {
            let loss = m.test_loss(&pool, ds, ds_seed)?;
            log::info!("{name} {m}: {loss:.6}");
            row.push(loss);
        }
        losses.push(row);
    }
    let names: Vec<String> = datasets.iter().map(|(n, _)| n.clone()).collect();
    let kinds: Vec<String> = datasets.iter().map(|(_, ds)| kind_name(ds)).collect();
    let method_names: Vec<String> = methods.iter().map(BenchMethod::name).collect();
    build_report(&method_names, &names, &kinds, &losses)
}

/// Aligned text table; every row is padded to the widest cell of its column.
pub fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate().take(cols) {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = width[i] - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(header);
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * cols.saturating_sub(1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

impl BenchReport {
    /// Per-method table of average rank, per-kind ranks and mean
    /// normalized improvement.
    pub fn table(&self) -> String {
        let mut header = vec!["method".to_string(), "avg_rank".to_string()];
        header.extend(self.average_rank_by_kind.keys().map(|k| format!("rank_{k}")));
        if self.mean_normalized_improvement.is_some() {
            header.push("norm_impr".into());
        }
        let rows: Vec<Vec<String>> = self
            .methods
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let mut r = vec![m.clone(), format!("{:.3}", self.average_rank[i])];
                r.extend(self.average_rank_by_kind.values().map(|v| format!("{:.3}", v[i])));
                if let Some(ni) = &self.mean_normalized_improvement {
                    r.push(format!("{:.3}", ni[i]));
                }
                r
            })
            .collect();
        render_table(&header, &rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stack::build_deep_stack;

    #[test]
    fn strategy_names_round_trip() {
        for m in BenchMethod::standard_grid() {
            let parsed: BenchMethod = m.name().parse().unwrap();
            assert_eq!(parsed, m);
        }
        assert_eq!(BenchMethod::standard_grid().len(), 12);
        assert!("all-gbt-l1".parse::<BenchMethod>().is_err());
        assert!("best-es-l3".parse::<BenchMethod>().is_err());
        let bad = BaselineStrategy {
            name: "x".into(),
            selection: BaselineSelection::SingleBest,
            layers: 1,
            blender: BaselineBlender::None,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn best_selection_takes_one_per_algorithm() {
        let ds = synth::regression_task(150, 3, 0.3, 3).unwrap();
        let pool = build_pool(&ds, 24, 2).unwrap();
        let best = best_per_algorithm(&pool);
        let algs: std::collections::BTreeSet<_> = pool.entries.iter().map(|e| e.config.algorithm).collect();
        assert_eq!(best.len(), algs.len());
        assert!(best.len() <= 6);
        for &i in &best {
            let alg = pool.entries[i].config.algorithm;
            for e in &pool.entries {
                if e.config.algorithm == alg {
                    assert!(pool.entries[i].val_loss <= e.val_loss);
                }
            }
        }
        let s: BaselineStrategy = "best-linear-l1".parse().unwrap();
        run_baseline(&s, &pool, &ds, 0).unwrap();
    }

    #[test]
    fn all_linear_l1_matches_a_direct_build() {
        let ds = synth::regression_task(120, 3, 0.3, 4).unwrap();
        let pool = build_pool(&ds, 8, 5).unwrap();
        let s: BaselineStrategy = "all-linear-l1".parse().unwrap();
        let a = baseline_test_predictions(&s, &pool, &ds, 7).unwrap();
        let config = EnsembleConfig {
            ensemble_size: pool.len(),
            diversity_weight: 0.0,
            num_layers: 1,
            blender: BlenderKind::Linear,
            dropout_rate: 0.0,
            retain: false,
        };
        let stack = build_deep_stack(&config, &pool, &ds, 7, None).unwrap();
        assert_eq!(stack.subset.indices, (0..pool.len()).collect::<Vec<_>>());
        let b = predict_stack(&stack, &ds.x(Part::Test)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_best_and_es_only() {
        let ds = synth::linear_task(120, 3, 0.05, 1).unwrap();
        let pool = build_pool(&ds, 10, 1).unwrap();
        let i = single_best_index(&pool).unwrap();
        let direct = refit_predict(&pool, i, &ds).unwrap();
        let sb = run_baseline(&BaselineStrategy::single_best(), &pool, &ds, 0).unwrap();
        assert_eq!(sb, task_metric(&direct, &ds.y(Part::Test), ds.kind()).unwrap());
        let es = run_baseline(&BaselineStrategy::es_only(), &pool, &ds, 0).unwrap();
        assert!(es.is_finite());
    }

    #[test]
    fn report_ranks_and_pairs() {
        let methods: Vec<String> = ["single-best", "all-es-l1", "pseo-5"].iter().map(|s| s.to_string()).collect();
        let losses: Vec<Vec<f64>> = (0..8).map(|i| vec![1.0, 0.9 + 0.01 * i as f64, 0.5]).collect();
        let names: Vec<String> = (0..8).map(|i| format!("d{i}")).collect();
        let kinds: Vec<String> = (0..8).map(|i| if i % 2 == 0 { "regression" } else { "classification" }.to_string()).collect();
        let r = build_report(&methods, &names, &kinds, &losses).unwrap();
        assert_eq!(r.average_rank, vec![3.0, 2.0, 1.0]);
        for d in &r.datasets {
            assert_eq!(d.ranks.iter().sum::<f64>(), 6.0);
        }
        assert_eq!(r.average_rank_by_kind.len(), 2);
        assert_eq!(r.mean_normalized_improvement.as_ref().unwrap()[2], 1.0);
        assert_eq!(r.wilcoxon.len(), 2);
        assert!(r.wilcoxon.iter().all(|p| p.p_value.unwrap() < 0.05));
        let t = r.table();
        assert!(t.lines().count() == 5 && t.contains("pseo-5"));
    }

    #[test]
    fn manifest_parses() {
        let text = r#"{"datasets": [
            {"name": "r", "source": "regression", "n": 60, "d": 2, "noise": 0.1, "seed": 3},
            {"name": "c", "source": "classification", "n": 90, "d": 2, "classes": 3, "noise": 0.2}
        ], "pool_size": 12}"#;
        let m: BenchManifest = serde_json::from_str(text).unwrap();
        assert_eq!(m.pool_size, 12);
        let ds = m.datasets[0].load(Path::new(".")).unwrap();
        assert_eq!(ds.n_samples(), 60);
        assert!(m.datasets[1].load(Path::new(".")).unwrap().kind().is_classification());
    }
}
