//! Datasets, splits, task kinds and prediction blocks.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StackError};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskKind {
    Classification { num_classes: usize },
    Regression,
}

impl TaskKind {
    pub fn classification(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(StackError::invalid(format!(
                "classification needs at least 2 classes, got {num_classes}"
            )));
        }
        Ok(TaskKind::Classification { num_classes })
    }

    /// Width of a prediction block for this task.
    pub fn width(&self) -> usize {
        match *self {
            TaskKind::Classification { num_classes } => num_classes,
            TaskKind::Regression => 1,
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, TaskKind::Classification { .. })
    }

    pub fn num_classes(&self) -> Option<usize> {
        match *self {
            TaskKind::Classification { num_classes } => Some(num_classes),
            TaskKind::Regression => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn is_empty(&self) -> bool {
        self.train.is_empty() && self.val.is_empty() && self.test.is_empty()
    }

    pub fn indices(&self, part: Part) -> &[usize] {
        match part {
            Part::Train => &self.train,
            Part::Val => &self.val,
            Part::Test => &self.test,
        }
    }
}

/// Feature matrix plus labels. Classification labels are class indices
/// stored as `f64`; they are validated to be integral and in range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<f64>,
    kind: TaskKind,
    split: Split,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<f64>, kind: TaskKind) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(StackError::shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let TaskKind::Classification { num_classes } = kind {
            if num_classes < 2 {
                return Err(StackError::invalid("classification needs at least 2 classes"));
            }
        }
        for ((row, col), v) in features.indexed_iter() {
            if !v.is_finite() {
                return Err(StackError::NonFinite { row, col });
            }
        }
        let label_col = features.ncols();
        for (row, &y) in labels.iter().enumerate() {
            if !y.is_finite() {
                return Err(StackError::NonFinite { row, col: label_col });
            }
            if let TaskKind::Classification { num_classes } = kind {
                if y.fract() != 0.0 || y < 0.0 || y >= num_classes as f64 {
                    return Err(StackError::LabelOutOfRange {
                        row,
                        label: y.to_string(),
                        num_classes,
                    });
                }
            }
        }
        Ok(Dataset {
            features,
            labels,
            kind,
            split: Split::default(),
        })
    }

    pub fn with_split(mut self, split: Split) -> Result<Self> {
        validate_split(&split, self.n_samples())?;
        self.split = split;
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn x(&self, part: Part) -> Array2<f64> {
        self.features.select(Axis(0), self.split.indices(part))
    }

    pub fn y(&self, part: Part) -> Vec<f64> {
        self.split
            .indices(part)
            .iter()
            .map(|&i| self.labels[i])
            .collect()
    }

    /// SHA-256 over the training rows, labels and all split indices.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(format!("{:?}", self.kind).as_bytes());
        h.update((self.n_features() as u64).to_le_bytes());
        for &i in &self.split.train {
            for v in self.features.row(i) {
                h.update(v.to_le_bytes());
            }
            h.update(self.labels[i].to_le_bytes());
        }
        for part in [&self.split.train, &self.split.val, &self.split.test] {
            h.update((part.len() as u64).to_le_bytes());
            for &i in part.iter() {
                h.update((i as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

fn validate_split(split: &Split, n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in split.train.iter().chain(&split.val).chain(&split.test) {
        if i >= n || seen[i] {
            return Err(StackError::invalid(format!(
                "split index {i} is out of range or duplicated"
            )));
        }
        seen[i] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(StackError::invalid("split does not cover every sample"));
    }
    Ok(())
}

/// Sidecar schema describing a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub label: String,
    pub task: String,
    #[serde(default)]
    pub num_classes: Option<usize>,
}

impl Schema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| StackError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn kind(&self) -> Result<TaskKind> {
        match self.task.as_str() {
            "classification" => {
                let k = self.num_classes.ok_or_else(|| {
                    StackError::invalid("classification schema requires num_classes")
                })?;
                TaskKind::classification(k)
            }
            "regression" => Ok(TaskKind::Regression),
            other => Err(StackError::invalid(format!("unknown task kind {other:?}"))),
        }
    }
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| StackError::io(path, e))?;
    parse_csv(&text, schema)
}

/// Parses CSV text with a header row. Row order is preserved and the
/// returned dataset has an empty split.
pub fn parse_csv(text: &str, schema: &Schema) -> Result<Dataset> {
    let kind = schema.kind()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| StackError::Csv(e.to_string()))?
        .clone();
    let label_col = headers
        .iter()
        .position(|h| h == schema.label)
        .ok_or_else(|| StackError::invalid(format!("label column {:?} not found", schema.label)))?;
    let n_cols = headers.len();
    let n_features = n_cols - 1;

    let mut flat = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| StackError::Csv(e.to_string()))?;
        if record.len() != n_cols {
            return Err(StackError::shape(format!(
                "row {row} has {} fields, expected {n_cols}",
                record.len()
            )));
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                StackError::invalid(format!("non-numeric value {cell:?} at row {row}, col {col}"))
            })?;
            if !v.is_finite() {
                return Err(StackError::NonFinite { row, col });
            }
            if col == label_col {
                labels.push(v);
            } else {
                flat.push(v);
            }
        }
    }
    let features = Array2::from_shape_vec((labels.len(), n_features), flat)
        .map_err(|e| StackError::shape(e.to_string()))?;
    Dataset::new(features, labels, kind)
}

/// Splits into train/val/test, stratified by class for classification.
///
/// Part sizes follow largest-remainder apportionment of `n` over the
/// fractions. Within each class the same apportionment is applied and then
/// reconciled against the global part sizes.
pub fn split_dataset(ds: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<Dataset> {
    let fr = [fractions.0, fractions.1, fractions.2];
    if fr.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return Err(StackError::invalid("every split fraction must be positive"));
    }
    if ((fr.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
        return Err(StackError::invalid("split fractions must sum to 1"));
    }
    let n = ds.n_samples();
    if n < 10 {
        return Err(StackError::invalid(format!("need at least 10 samples to split, got {n}")));
    }
    let mut rng = seed::rng(seed::derive_str(seed, "split"));

    // Group indices into strata.
    let strata: Vec<Vec<usize>> = match ds.kind {
        TaskKind::Classification { num_classes } => {
            let mut groups = vec![Vec::new(); num_classes];
            for (i, &y) in ds.labels.iter().enumerate() {
                groups[y as usize].push(i);
            }
            for (c, g) in groups.iter().enumerate() {
                if !g.is_empty() && g.len() < fr.len() {
                    return Err(StackError::invalid(format!(
                        "class {c} has {} instances; at least {} are needed to appear in every part",
                        g.len(),
                        fr.len()
                    )));
                }
            }
            groups.into_iter().filter(|g| !g.is_empty()).collect()
        }
        TaskKind::Regression => vec![(0..n).collect()],
    };

    let totals = apportion(n, &fr);
    let mut counts: Vec<[usize; 3]> = Vec::with_capacity(strata.len());
    let mut fracs: Vec<[f64; 3]> = Vec::with_capacity(strata.len());
    for g in &strata {
        let mut c = [0usize; 3];
        let mut rem = [0f64; 3];
        for p in 0..3 {
            let q = g.len() as f64 * fr[p];
            c[p] = q.floor() as usize;
            rem[p] = q - q.floor();
        }
        counts.push(c);
        fracs.push(rem);
    }
    let mut deficit: [usize; 3] = [0; 3];
    for p in 0..3 {
        let assigned: usize = counts.iter().map(|c| c[p]).sum();
        deficit[p] = totals[p].saturating_sub(assigned);
    }
    let mut leftover: Vec<usize> = strata
        .iter()
        .zip(&counts)
        .map(|(g, c)| g.len() - c.iter().sum::<usize>())
        .collect();
    // First pass: hand out remaining units by largest fractional remainder.
    let mut cand: Vec<(usize, usize, f64)> = Vec::new();
    for (s, rem) in fracs.iter().enumerate() {
        for p in 0..3 {
            cand.push((s, p, rem[p]));
        }
    }
    cand.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    for &(s, p, _) in &cand {
        if leftover[s] > 0 && deficit[p] > 0 {
            counts[s][p] += 1;
            leftover[s] -= 1;
            deficit[p] -= 1;
        }
    }
    // Second pass: anything left goes to any part still short.
    for s in 0..strata.len() {
        for p in 0..3 {
            while leftover[s] > 0 && deficit[p] > 0 {
                counts[s][p] += 1;
                leftover[s] -= 1;
                deficit[p] -= 1;
            }
        }
    }
    // Every class with enough instances must reach every part.
    for c in counts.iter_mut() {
        for p in 0..3 {
            if c[p] == 0 {
                let donor = (0..3).max_by_key(|&q| (c[q], usize::MAX - q)).unwrap();
                c[donor] -= 1;
                c[p] += 1;
            }
        }
    }

    let mut split = Split::default();
    for (g, c) in strata.iter().zip(&counts) {
        let mut idx = g.clone();
        idx.shuffle(&mut rng);
        let (a, rest) = idx.split_at(c[0]);
        let (b, t) = rest.split_at(c[1]);
        split.train.extend_from_slice(a);
        split.val.extend_from_slice(b);
        split.test.extend_from_slice(t);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    ds.clone().with_split(split)
}

/// Largest-remainder apportionment of `n` items over `fractions`.
fn apportion(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| n as f64 * f).collect();
    let mut out: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = n - out.iter().sum::<usize>();
    for &p in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[p] += 1;
        left -= 1;
    }
    out
}

/// Model output on a set of rows: class probabilities for classification,
/// a single column for regression.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionBlock(Array2<f64>);

impl PredictionBlock {
    /// Wraps `values` without validation.
    pub fn from_array(values: Array2<f64>) -> Self {
        PredictionBlock(values)
    }

    /// Wraps `values`, enforcing the simplex/finite invariants for `kind`.
    pub fn checked(values: Array2<f64>, kind: TaskKind) -> Result<Self> {
        if values.ncols() != kind.width() {
            return Err(StackError::shape(format!(
                "prediction width {} does not match task width {}",
                values.ncols(),
                kind.width()
            )));
        }
        for (r, row) in values.outer_iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(StackError::NonFinite { row: r, col: c });
                }
                if kind.is_classification() && !(-1e-12..=1.0 + 1e-12).contains(&v) {
                    return Err(StackError::invalid(format!(
                        "probability {v} outside [0,1] at row {r}"
                    )));
                }
            }
            if kind.is_classification() {
                let s: f64 = row.sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(StackError::invalid(format!("row {r} sums to {s}, not 1")));
                }
            }
        }
        Ok(PredictionBlock(values))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn width(&self) -> usize {
        self.0.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> PredictionBlock {
        PredictionBlock(self.0.select(Axis(0), rows))
    }

    /// Element-wise mean of equally shaped blocks.
    pub fn mean(blocks: &[PredictionBlock]) -> Result<PredictionBlock> {
        let first = blocks
            .first()
            .ok_or_else(|| StackError::invalid("cannot average zero prediction blocks"))?;
        let mut acc = Array2::<f64>::zeros(first.0.raw_dim());
        for b in blocks {
            if b.0.dim() != acc.dim() {
                return Err(StackError::shape("prediction blocks differ in shape"));
            }
            acc += &b.0;
        }
        acc /= blocks.len() as f64;
        Ok(PredictionBlock(acc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn reg_schema() -> Schema {
        Schema {
            label: "y".into(),
            task: "regression".into(),
            num_classes: None,
        }
    }

    fn cls_schema(k: usize) -> Schema {
        Schema {
            label: "y".into(),
            task: "classification".into(),
            num_classes: Some(k),
        }
    }

    #[test]
    fn parse_small_csv() {
        let text = "a,b,y\n1,2,0\n3,4,1\n5,6,1\n7,8,0\n";
        let ds = parse_csv(text, &cls_schema(2)).unwrap();
        assert_eq!(ds.n_samples(), 4);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.kind(), TaskKind::Classification { num_classes: 2 });
        assert_eq!(ds.features()[[2, 1]], 6.0);
        assert!(ds.split().is_empty());
    }

    #[test]
    fn label_column_can_be_first() {
        let ds = parse_csv("y,a\n1.5,2\n2.5,3\n", &reg_schema()).unwrap();
        assert_eq!(ds.labels(), &[1.5, 2.5]);
        assert_eq!(ds.features()[[1, 0]], 3.0);
    }

    #[test]
    fn nan_cell_is_rejected() {
        let err = parse_csv("a,y\n1,0\nNaN,1\n", &reg_schema()).unwrap_err();
        assert_eq!(err.to_string(), "non-finite value at row 1, col 0");
    }

    #[test]
    fn label_out_of_declared_range() {
        let err = parse_csv("a,y\n1,0\n2,5\n", &cls_schema(3)).unwrap_err();
        assert!(matches!(err, StackError::LabelOutOfRange { row: 1, .. }));
    }

    #[test]
    fn non_numeric_and_missing_label() {
        assert!(parse_csv("a,y\nfoo,1\n", &reg_schema()).is_err());
        let schema = Schema {
            label: "target".into(),
            ..reg_schema()
        };
        assert!(parse_csv("a,y\n1,1\n", &schema).is_err());
        assert!(load_csv(Path::new("/nonexistent/file.csv"), &reg_schema()).is_err());
    }

    fn reg_dataset(n: usize) -> Dataset {
        let x = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        Dataset::new(x, (0..n).map(|i| i as f64).collect(), TaskKind::Regression).unwrap()
    }

    #[test]
    fn split_sizes_60_20_20() {
        let ds = split_dataset(&reg_dataset(100), (0.6, 0.2, 0.2), 7).unwrap();
        let s = ds.split();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (60, 20, 20));
        let again = split_dataset(&reg_dataset(100), (0.6, 0.2, 0.2), 7).unwrap();
        assert_eq!(s, again.split());
        let other = split_dataset(&reg_dataset(100), (0.6, 0.2, 0.2), 8).unwrap();
        assert_ne!(s, other.split());
    }

    #[test]
    fn stratified_binary_split_balances_classes() {
        let x = Array2::zeros((100, 1));
        let y: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let ds = Dataset::new(x, y, TaskKind::classification(2).unwrap()).unwrap();
        let ds = split_dataset(&ds, (0.6, 0.2, 0.2), 3).unwrap();
        for part in [Part::Train, Part::Val, Part::Test] {
            let ys = ds.y(part);
            let ones = ys.iter().filter(|&&v| v == 1.0).count() as f64;
            let half = ys.len() as f64 / 2.0;
            assert!((ones - half).abs() <= 1.0, "{part:?}: {ones} of {}", ys.len());
        }
    }

    #[test]
    fn small_class_reaches_every_part() {
        let x = Array2::zeros((20, 1));
        let mut y = vec![0.0; 20];
        y[3] = 1.0;
        y[9] = 1.0;
        y[15] = 1.0;
        let ds = Dataset::new(x, y, TaskKind::classification(2).unwrap()).unwrap();
        let ds = split_dataset(&ds, (0.6, 0.2, 0.2), 1).unwrap();
        for part in [Part::Train, Part::Val, Part::Test] {
            assert!(ds.y(part).contains(&1.0));
        }
    }

    #[test]
    fn split_rejects_tiny_class_and_bad_fractions() {
        let x = Array2::zeros((20, 1));
        let mut y = vec![0.0; 20];
        y[0] = 1.0;
        let ds = Dataset::new(x, y, TaskKind::classification(2).unwrap()).unwrap();
        assert!(split_dataset(&ds, (0.6, 0.2, 0.2), 1).is_err());
        assert!(split_dataset(&reg_dataset(50), (0.6, 0.4, 0.0), 1).is_err());
        assert!(split_dataset(&reg_dataset(50), (0.6, 0.3, 0.3), 1).is_err());
        assert!(split_dataset(&reg_dataset(9), (0.6, 0.2, 0.2), 1).is_err());
    }

    #[test]
    fn checked_block_enforces_simplex() {
        let kind = TaskKind::classification(2).unwrap();
        assert!(PredictionBlock::checked(array![[0.3, 0.7]], kind).is_ok());
        assert!(PredictionBlock::checked(array![[0.3, 0.6]], kind).is_err());
        assert!(PredictionBlock::checked(array![[1.2, -0.2]], kind).is_err());
        assert!(PredictionBlock::checked(array![[f64::NAN]], TaskKind::Regression).is_err());
    }

    proptest::proptest! {
        #[test]
        fn split_is_a_partition(n in 10usize..200, seed in 0u64..1000, a in 0.2f64..0.7) {
            let b = (1.0 - a) / 2.0;
            let ds = split_dataset(&reg_dataset(n), (a, b, 1.0 - a - b), seed).unwrap();
            let s = ds.split();
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            all.sort_unstable();
            proptest::prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
