//! Diversity-aware base-model subset selection.
//!
//! The error covariance `G` holds the mean inner product of residual vectors
//! for every pair of pool models; its diagonal is each model's squared-error
//! loss. `G̃` reweights it as `(1 − ω)·diag(G) + ω·offdiag(G)`, and a subset
//! of size `n′` minimizes `zᵀG̃z` over binary `z` with `Σz = n′`.
//!
//! The binary program is relaxed to `min Tr(G̃Z)` subject to `Tr(Z) = n′`
//! and `Z ⪰ zzᵀ` with `z = diag(Z)`, which implies `Z ⪰ 0` and
//! `0 ≤ Z_ii ≤ 1`. It is solved in factored form by accelerated projected
//! gradient and rounded by keeping the `n′` largest diagonal entries. Small instances are solved exactly by enumeration.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{PredictionBlock, TaskKind};
use crate::error::{Result, StackError};
use crate::loss::{residuals, squared_error_loss};
use crate::seed;
use crate::zoo::CandidatePool;

/// Bounds on the ensemble size and diversity weight.
pub const MIN_ENSEMBLE_SIZE: usize = 5;
pub const MAX_ENSEMBLE_SIZE: usize = 50;
pub const MAX_OMEGA: f64 = 0.5;

/// Largest `C(n, n′)` enumerated exactly by default.
pub const BRUTE_FORCE_LIMIT: u64 = 2_000_000;

const RELAX_STARTS: usize = 5;
const RELAX_MAX_ITERS: usize = 1500;
const POLISH_MAX_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCovariance {
    pub g: Array2<f64>,
    pub omega: f64,
    pub g_tilde: Array2<f64>,
}

impl WeightedCovariance {
    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    /// `zᵀG̃z` for the indicator vector of `indices`.
    pub fn objective(&self, indices: &[usize]) -> f64 {
        let mut total = 0.0;
        for &a in indices {
            for &b in indices {
                total += self.g_tilde[[a, b]];
            }
        }
        total
    }

    /// `G̃` as CSV text, for debugging.
    pub fn g_tilde_csv(&self) -> String {
        let mut out = String::new();
        for row in self.g_tilde.outer_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    Exact,
    Relaxation,
    /// A caller-supplied subset; both objectives are its unweighted value.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSelection {
    pub size: usize,
    pub omega: f64,
    pub indices: Vec<usize>,
    pub relaxed_objective: f64,
    pub rounded_objective: f64,
    pub method: SelectionMethod,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Wraps an explicit list of pool indices as a selection. Objectives are
/// evaluated at ω = 0, i.e. the summed validation losses.
pub fn fixed_subset(pool: &CandidatePool, val_labels: &[f64], indices: Vec<usize>) -> Result<SubsetSelection> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= pool.len()) {
        return Err(StackError::invalid(format!("subset index {bad} outside the pool")));
    }
    let mut objective = 0.0;
    for &i in &indices {
        objective += squared_error_loss(&pool.entries[i].val_pred, val_labels, pool.kind)?;
    }
    Ok(SubsetSelection {
        size: indices.len(),
        omega: 0.0,
        indices,
        relaxed_objective: objective,
        rounded_objective: objective,
        method: SelectionMethod::Fixed,
        warnings: Vec::new(),
    })
}

/// Mean over samples of `(y − p_i)·(y − p_j)`.
pub fn pairwise_diversity(
    p_i: &PredictionBlock,
    p_j: &PredictionBlock,
    labels: &[f64],
    kind: TaskKind,
) -> Result<f64> {
    let r_i = residuals(p_i, labels, kind)?;
    let r_j = residuals(p_j, labels, kind)?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    Ok((&r_i * &r_j).sum() / labels.len() as f64)
}

/// `G_ij = D(m_i, m_j)` over the pool's stored validation predictions.
pub fn build_error_covariance(
    pool: &CandidatePool,
    val_labels: &[f64],
    kind: TaskKind,
) -> Result<Array2<f64>> {
    let preds: Vec<&PredictionBlock> = pool.val_preds();
    error_covariance(&preds, val_labels, kind)
}

pub fn error_covariance(preds: &[&PredictionBlock], labels: &[f64], kind: TaskKind) -> Result<Array2<f64>> {
    if preds.is_empty() {
        return Err(StackError::invalid("cannot build a covariance for an empty pool"));
    }
    let n = preds.len();
    let len = labels.len() * kind.width();
    let mut flat = Array2::<f64>::zeros((n, len));
    for (i, p) in preds.iter().enumerate() {
        let r = residuals(p, labels, kind)?;
        for (dst, src) in flat.row_mut(i).iter_mut().zip(r.iter()) {
            *dst = *src;
        }
    }
    let mut g = flat.dot(&flat.t());
    if !labels.is_empty() {
        g /= labels.len() as f64;
    }
    // Symmetrize exactly.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (g[[i, j]] + g[[j, i]]);
            g[[i, j]] = v;
            g[[j, i]] = v;
        }
    }
    Ok(g)
}

pub fn weight_matrix(g: &Array2<f64>, omega: f64) -> Result<WeightedCovariance> {
    if !(0.0..=MAX_OMEGA).contains(&omega) {
        return Err(StackError::invalid(format!(
            "diversity weight {omega} outside [0, {MAX_OMEGA}]"
        )));
    }
    let n = g.nrows();
    if g.ncols() != n {
        return Err(StackError::shape("error covariance must be square"));
    }
    for i in 0..n {
        for j in 0..i {
            if (g[[i, j]] - g[[j, i]]).abs() > 1e-9 {
                return Err(StackError::invalid("error covariance is not symmetric"));
            }
        }
    }
    let g_tilde = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            (1.0 - omega) * g[[i, i]]
        } else {
            omega * g[[i, j]]
        }
    });
    Ok(WeightedCovariance {
        g: g.clone(),
        omega,
        g_tilde,
    })
}

/// Relaxed solution `Z = VVᵀ` and its objective `Tr(G̃Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    pub z: Array2<f64>,
    pub objective: f64,
}

pub fn solve_relaxation(wc: &WeightedCovariance, size: usize, seed_: u64) -> Result<Relaxation> {
    let n = wc.n();
    if size == 0 || size > n {
        return Err(StackError::invalid(format!(
            "subset size {size} must lie in 1..={n}"
        )));
    }
    let g = &wc.g_tilde;
    if size == n {
        return Ok(Relaxation {
            z: Array2::ones((n, n)),
            objective: g.sum(),
        });
    }
    let lifted = Lifted::new(g, size);
    let rank = (n + 1).min(((2.0 * (n as f64 + 2.0)).sqrt().ceil() as usize + 1).max(2));
    let step = 1.0 / spectral_radius(g).max(1e-12);

    let mut best: Option<(f64, Array2<f64>)> = None;
    let keep = |w: Array2<f64>, best: &mut Option<(f64, Array2<f64>)>| {
        let obj = lifted.objective(&w);
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            *best = Some((obj, w));
        }
    };
    for start in 0..RELAX_STARTS {
        let mut rng = seed::rng(seed::derive(seed_, start as u64));
        let mut w = Array2::from_shape_fn((n, rank), |_| gaussian(&mut rng));
        lifted.project(&mut w);
        let w = lifted.descend(w, step, RELAX_MAX_ITERS);
        // The vertex its rounding points at, and a descent restarted near it.
        let vertex = lifted.vertex(&round_solution(&lifted.z(&w), size), rank);
        let mut nudged = vertex.clone();
        for mut row in nudged.outer_iter_mut() {
            for x in row.iter_mut().skip(1) {
                *x = 1e-3 * gaussian(&mut rng);
            }
        }
        lifted.project(&mut nudged);
        let nudged = lifted.descend(nudged, step, POLISH_MAX_ITERS);
        keep(w, &mut best);
        keep(vertex, &mut best);
        keep(nudged, &mut best);
    }
    let (_, w) = best.unwrap();
    let z = symmetrize_duplicates(g, lifted.z(&w));
    let objective = (g * &z).sum();
    Ok(Relaxation { z, objective })
}

fn gaussian(rng: &mut seed::Rng) -> f64 {
    use rand::Rng as _;
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn spectral_radius(g: &Array2<f64>) -> f64 {
    let n = g.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| g[[i, j]]);
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &b| a.max(b.abs()))
}

/// Factored form of the lifted relaxation. Each model owns a unit row `w_i`
/// and `Z` is the Gram matrix of `(e₀ + w_i)/2`, so `z_i = Z_ii = (1 + w_i0)/2`
/// and `Z ⪰ zzᵀ` holds by construction; `Σz = n′` becomes `Σ w_i0 = 2n′ − n`.
struct Lifted<'a> {
    g: &'a Array2<f64>,
    row_sums: Array1<f64>,
    total: f64,
    target: f64,
}

impl<'a> Lifted<'a> {
    fn new(g: &'a Array2<f64>, size: usize) -> Self {
        let row_sums = g.sum_axis(Axis(1));
        Self {
            g,
            total: row_sums.sum(),
            row_sums,
            target: 2.0 * size as f64 - g.nrows() as f64,
        }
    }

    /// `Tr(G̃Z)` given `G̃W`.
    fn value(&self, w: &Array2<f64>, gw: &Array2<f64>) -> f64 {
        0.25 * (self.total + 2.0 * w.column(0).dot(&self.row_sums) + (gw * w).sum())
    }

    fn objective(&self, w: &Array2<f64>) -> f64 {
        self.value(w, &self.g.dot(w))
    }

    fn z(&self, w: &Array2<f64>) -> Array2<f64> {
        let b = {
            let mut b = w.clone();
            b.column_mut(0).mapv_inplace(|x| x + 1.0);
            b * 0.5
        };
        let mut z = b.dot(&b.t());
        z.mapv_inplace(|x| x.clamp(-1.0, 1.0));
        for i in 0..z.nrows() {
            z[[i, i]] = z[[i, i]].clamp(0.0, 1.0);
        }
        z
    }

    /// Rows at `+e₀` for the chosen indices and `−e₀` elsewhere.
    fn vertex(&self, chosen: &[usize], rank: usize) -> Array2<f64> {
        let mut w = Array2::zeros((self.g.nrows(), rank));
        w.column_mut(0).fill(-1.0);
        for &i in chosen {
            w[[i, 0]] = 1.0;
        }
        w
    }

    /// Nearest feasible point: `w_i = normalize(p_i + λe₀)` with the scalar
    /// `λ` found by bisection, since `Σ w_i0` increases with it.
    fn project(&self, p: &mut Array2<f64>) {
        let lead: Vec<f64> = p.column(0).to_vec();
        let rest: Vec<f64> = p.outer_iter().map(|r| r.dot(&r) - r[0] * r[0]).map(|q| q.max(0.0)).collect();
        let sum_at = |lambda: f64| -> f64 {
            lead.iter()
                .zip(&rest)
                .map(|(&a, &q)| {
                    let s = a + lambda;
                    let norm = (q + s * s).sqrt();
                    if norm > 0.0 {
                        s / norm
                    } else {
                        0.0
                    }
                })
                .sum()
        };
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        while sum_at(lo) > self.target && lo > -1e300 {
            lo *= 2.0;
        }
        while sum_at(hi) < self.target && hi < 1e300 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sum_at(mid) < self.target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = 0.5 * (lo + hi);
        for (i, mut row) in p.outer_iter_mut().enumerate() {
            row[0] = lead[i] + lambda;
            let norm = (rest[i] + row[0] * row[0]).sqrt();
            if norm > 0.0 {
                row /= norm;
            } else {
                row[0] = 1.0;
            }
        }
    }

    /// Nesterov-accelerated projected gradient with function-value restarts.
    /// `G̃·Y` at the extrapolated point is formed from cached products, so
    /// each iteration costs one matrix product.
    fn descend(&self, w: Array2<f64>, step: f64, max_iters: usize) -> Array2<f64> {
        let g = self.g;
        let mut gw = g.dot(&w);
        let mut f = self.value(&w, &gw);
        let mut w = w;
        let mut prev = w.clone();
        let mut gprev = gw.clone();
        let mut momentum = 1.0f64;
        let mut stalled = 0;
        let advance = |from: &Array2<f64>, gfrom: &Array2<f64>| {
            let mut c = from - &(gfrom * (0.5 * step));
            c.column_mut(0).scaled_add(-0.5 * step, &self.row_sums);
            self.project(&mut c);
            c
        };
        for _ in 0..max_iters {
            let next_m = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next_m;
            let y = &w + &((&w - &prev) * beta);
            let gy = &gw + &((&gw - &gprev) * beta);
            let mut cand = advance(&y, &gy);
            let mut gc = g.dot(&cand);
            let mut fc = self.value(&cand, &gc);
            if fc > f {
                // Restart with a plain projected gradient step.
                momentum = 1.0;
                cand = advance(&w, &gw);
                gc = g.dot(&cand);
                fc = self.value(&cand, &gc);
                if fc > f {
                    break;
                }
            } else {
                momentum = next_m;
            }
            let improved = f - fc;
            prev = std::mem::replace(&mut w, cand);
            gprev = std::mem::replace(&mut gw, gc);
            f = fc;
            if improved <= 1e-10 * f.abs().max(1e-12) {
                stalled += 1;
                if stalled >= 10 {
                    break;
                }
            } else {
                stalled = 0;
            }
        }
        w
    }
}

/// Averages `Z` over every permutation of interchangeable models, those whose
/// rows of `G̃` agree up to swapping the pair. Feasibility and `Tr(G̃Z)` are
/// unchanged, and duplicates end with exactly equal diagonals.
fn symmetrize_duplicates(g: &Array2<f64>, z: Array2<f64>) -> Array2<f64> {
    let n = g.nrows();
    let swappable = |i: usize, j: usize| {
        g[[i, i]] == g[[j, j]] && (0..n).all(|k| k == i || k == j || g[[i, k]] == g[[j, k]])
    };
    let mut class = vec![usize::MAX; n];
    let mut reps: Vec<usize> = Vec::new();
    for i in 0..n {
        match reps.iter().position(|&r| swappable(r, i)) {
            Some(c) => class[i] = c,
            None => {
                class[i] = reps.len();
                reps.push(i);
            }
        }
    }
    if reps.len() == n {
        return z;
    }
    let m = reps.len();
    let mut count = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut block = Array2::<f64>::zeros((m, m));
    for i in 0..n {
        count[class[i]] += 1.0;
        diag[class[i]] += z[[i, i]];
        for j in 0..n {
            if i != j {
                block[[class[i], class[j]]] += z[[i, j]];
            }
        }
    }
    Array2::from_shape_fn((n, n), |(i, j)| {
        let (a, b) = (class[i], class[j]);
        if i == j {
            diag[a] / count[a]
        } else {
            let pairs = if a == b { count[a] * (count[a] - 1.0) } else { count[a] * count[b] };
            block[[a, b]] / pairs
        }
    })
}

/// Indices of the `size` largest diagonal entries of `z`, lower index first
/// on ties, returned in ascending order.
pub fn round_solution(z: &Array2<f64>, size: usize) -> Vec<usize> {
    let n = z.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[[b, b]].total_cmp(&z[[a, a]]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = order.into_iter().take(size.min(n)).collect();
    picked.sort_unstable();
    picked
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return c;
        }
    }
    c
}

/// Exact minimizer of `zᵀG̃z` by enumeration; lexicographically smallest
/// index set on ties. The relaxation is also solved so both objective
/// fields are populated.
pub fn brute_force_select(wc: &WeightedCovariance, size: usize) -> Result<SubsetSelection> {
    let n = wc.n();
    if size == 0 || size > n {
        return Err(StackError::invalid(format!("subset size {size} must lie in 1..={n}")));
    }
    if binomial(n, size) > u128::from(BRUTE_FORCE_LIMIT) {
        return Err(StackError::Combinatorial {
            n,
            k: size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let (indices, objective) = enumerate_best(&wc.g_tilde, size);
    let relaxed = solve_relaxation(wc, size, 0)?;
    Ok(SubsetSelection {
        size,
        omega: wc.omega,
        indices,
        relaxed_objective: relaxed.objective,
        rounded_objective: objective,
        method: SelectionMethod::Exact,
        warnings: Vec::new(),
    })
}

fn enumerate_best(g: &Array2<f64>, size: usize) -> (Vec<usize>, f64) {
    let n = g.nrows();
    let mut combo: Vec<usize> = (0..size).collect();
    let mut best = combo.clone();
    let mut best_obj = f64::INFINITY;
    loop {
        let mut obj = 0.0;
        for &a in &combo {
            for &b in &combo {
                obj += g[[a, b]];
            }
        }
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&combo);
        }
        // Advance to the next combination in lexicographic order.
        let mut i = size;
        loop {
            if i == 0 {
                return (best, best_obj);
            }
            i -= 1;
            if combo[i] < n - size + i {
                break;
            }
        }
        combo[i] += 1;
        for j in i + 1..size {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectOptions {
    /// Enumerate exactly when `C(n, n′)` does not exceed this.
    pub brute_force_limit: u64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            brute_force_limit: BRUTE_FORCE_LIMIT,
        }
    }
}

pub fn select_subset(
    pool: &CandidatePool,
    val_labels: &[f64],
    size: usize,
    omega: f64,
    seed_: u64,
) -> Result<SubsetSelection> {
    select_subset_with(pool, val_labels, size, omega, seed_, SelectOptions::default())
}

pub fn select_subset_with(
    pool: &CandidatePool,
    val_labels: &[f64],
    size: usize,
    omega: f64,
    seed_: u64,
    opts: SelectOptions,
) -> Result<SubsetSelection> {
    if size < MIN_ENSEMBLE_SIZE {
        return Err(StackError::invalid(format!(
            "ensemble size {size} is below the minimum of {MIN_ENSEMBLE_SIZE}"
        )));
    }
    let g = build_error_covariance(pool, val_labels, pool.kind)?;
    let wc = weight_matrix(&g, omega)?;
    select_from_covariance(&wc, size, seed_, opts)
}

/// Selection on a prebuilt weighted covariance. `size` is clamped to
/// `min(50, n)` with a recorded warning.
pub fn select_from_covariance(
    wc: &WeightedCovariance,
    size: usize,
    seed_: u64,
    opts: SelectOptions,
) -> Result<SubsetSelection> {
    let n = wc.n();
    let mut warnings = Vec::new();
    let cap = n.min(MAX_ENSEMBLE_SIZE);
    let size = if size > cap {
        let msg = format!("ensemble size {size} clamped to {cap}");
        log::warn!("{msg}");
        warnings.push(msg);
        cap
    } else {
        size
    };
    if size == 0 {
        return Err(StackError::invalid("cannot select from an empty pool"));
    }
    let relaxed = solve_relaxation(wc, size, seed_)?;
    let (indices, method) = if binomial(n, size) <= u128::from(opts.brute_force_limit) {
        (enumerate_best(&wc.g_tilde, size).0, SelectionMethod::Exact)
    } else {
        (round_solution(&relaxed.z, size), SelectionMethod::Relaxation)
    };
    let rounded_objective = wc.objective(&indices);
    Ok(SubsetSelection {
        size,
        omega: wc.omega,
        indices,
        relaxed_objective: relaxed.objective,
        rounded_objective,
        method,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng as _;

    fn reg_block(v: &[f64]) -> PredictionBlock {
        PredictionBlock::from_array(Array2::from_shape_fn((v.len(), 1), |(i, _)| v[i]))
    }

    /// Independent double loop over samples.
    fn diversity_oracle(a: &[f64], b: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..y.len() {
            s += (y[k] - a[k]) * (y[k] - b[k]);
        }
        s / y.len() as f64
    }

    #[test]
    fn diversity_examples() {
        let r = TaskKind::Regression;
        let y = [1.0, 2.0];
        let d = pairwise_diversity(&reg_block(&[1.5, 1.5]), &reg_block(&[0.5, 2.5]), &y, r).unwrap();
        assert!((d + 0.25).abs() < 1e-15);
        let perfect = reg_block(&y);
        assert_eq!(pairwise_diversity(&perfect, &reg_block(&[7.0, -1.0]), &y, r).unwrap(), 0.0);
        let p = reg_block(&[0.3, 2.9]);
        let mse = crate::loss::squared_error_loss(&p, &y, r).unwrap();
        assert!((pairwise_diversity(&p, &p, &y, r).unwrap() - mse).abs() < 1e-15);
    }

    #[test]
    fn covariance_matches_elementwise_oracle() {
        let y = [0.5, -1.0, 2.0, 0.0, 1.0];
        let preds = [
            vec![0.4, -0.7, 1.5, 0.3, 1.2],
            vec![0.9, -1.5, 2.2, -0.4, 0.6],
            vec![0.5, -1.0, 1.0, 0.1, 1.9],
        ];
        let blocks: Vec<PredictionBlock> = preds.iter().map(|p| reg_block(p)).collect();
        let refs: Vec<&PredictionBlock> = blocks.iter().collect();
        let g = error_covariance(&refs, &y, TaskKind::Regression).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((g[[i, j]] - diversity_oracle(&preds[i], &preds[j], &y)).abs() < 1e-12);
            }
        }
        let one = error_covariance(&refs[..1], &y, TaskKind::Regression).unwrap();
        assert_eq!(one.dim(), (1, 1));
        let dup = error_covariance(&[refs[0], refs[0]], &y, TaskKind::Regression).unwrap();
        assert!(dup.iter().all(|&v| (v - dup[[0, 0]]).abs() < 1e-15));
    }

    #[test]
    fn weight_matrix_examples() {
        let g = array![[1.0, 0.2], [0.2, 2.0]];
        let wc = weight_matrix(&g, 0.5).unwrap();
        let want = array![[0.5, 0.1], [0.1, 1.0]];
        assert!(wc.g_tilde.iter().zip(want.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        let zero = weight_matrix(&g, 0.0).unwrap();
        assert_eq!(zero.g_tilde, array![[1.0, 0.0], [0.0, 2.0]]);
        assert!(weight_matrix(&g, 0.6).is_err());
        assert!(weight_matrix(&g, -0.1).is_err());
    }

    #[test]
    fn relaxation_prefers_cheaper_diagonal() {
        let wc = weight_matrix(&array![[1.0, 0.0], [0.0, 2.0]], 0.0).unwrap();
        let r = solve_relaxation(&wc, 1, 0).unwrap();
        assert!(r.z[[0, 0]] > r.z[[1, 1]]);
        assert!((r.objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn scaled_identity_objective_is_constant() {
        let n = 6;
        let g = Array2::from_diag(&ndarray::Array1::from_elem(n, 0.7 / 0.6));
        let wc = weight_matrix(&g, 0.4).unwrap();
        for size in 1..=n {
            let r = solve_relaxation(&wc, size, 3).unwrap();
            assert!((r.objective - 0.7 * size as f64).abs() < 1e-9, "{size}: {}", r.objective);
        }
    }

    fn random_wc(n: usize, omega: f64, seed_: u64) -> WeightedCovariance {
        let mut rng = seed::rng(seed_);
        let y: Vec<f64> = (0..30).map(|_| rng.gen::<f64>()).collect();
        let blocks: Vec<PredictionBlock> = (0..n)
            .map(|_| {
                let bias = rng.gen::<f64>() - 0.5;
                let v: Vec<f64> = y.iter().map(|t| t + bias + 0.5 * (rng.gen::<f64>() - 0.5)).collect();
                reg_block(&v)
            })
            .collect();
        let refs: Vec<&PredictionBlock> = blocks.iter().collect();
        let g = error_covariance(&refs, &y, TaskKind::Regression).unwrap();
        weight_matrix(&g, omega).unwrap()
    }

    #[test]
    fn relaxation_lower_bounds_exact_optimum() {
        for s in 0..12 {
            let wc = random_wc(8, 0.05 * (s % 11) as f64, s);
            for size in [1, 3, 5] {
                let exact = enumerate_best(&wc.g_tilde, size).1;
                let r = solve_relaxation(&wc, size, s).unwrap();
                assert!(r.objective <= exact + 1e-6, "seed {s} size {size}: {} > {exact}", r.objective);
                let tr: f64 = (0..8).map(|i| r.z[[i, i]]).sum();
                assert!((tr - size as f64).abs() < 1e-4);
                assert!((0..8).all(|i| r.z[[i, i]] <= 1.0 + 1e-6 && r.z[[i, i]] >= -1e-6));
            }
        }
    }

    #[test]
    fn relaxation_is_deterministic() {
        let wc = random_wc(7, 0.3, 4);
        assert_eq!(solve_relaxation(&wc, 3, 9).unwrap(), solve_relaxation(&wc, 3, 9).unwrap());
        assert!(solve_relaxation(&wc, 8, 9).is_err());
    }

    #[test]
    fn rounding_examples() {
        let z = Array2::from_diag(&ndarray::arr1(&[0.9, 0.1, 0.8, 0.2]));
        assert_eq!(round_solution(&z, 2), vec![0, 2]);
        let tie = Array2::from_diag(&ndarray::arr1(&[0.5, 0.5]));
        assert_eq!(round_solution(&tie, 1), vec![0]);
        assert_eq!(round_solution(&z, 4), vec![0, 1, 2, 3]);
    }

    #[test]
    fn brute_force_examples() {
        // ω = 0 keeps only diagonals: the cheapest models win.
        let wc = random_wc(9, 0.0, 2);
        let sel = brute_force_select(&wc, 4).unwrap();
        let mut by_diag: Vec<usize> = (0..9).collect();
        by_diag.sort_by(|&a, &b| wc.g[[a, a]].total_cmp(&wc.g[[b, b]]));
        let mut want = by_diag[..4].to_vec();
        want.sort_unstable();
        assert_eq!(sel.indices, want);

        // Full set.
        let all = brute_force_select(&wc, 9).unwrap();
        assert_eq!(all.indices, (0..9).collect::<Vec<_>>());
        assert!((all.rounded_objective - wc.g_tilde.sum()).abs() < 1e-12);

        assert!(matches!(
            brute_force_select(&random_wc(40, 0.1, 1), 20),
            Err(StackError::Combinatorial { .. })
        ));
    }

    #[test]
    fn anti_correlated_pair_beats_cheap_correlated_pair() {
        // Models 0 and 1 are cheap but make the same errors; model 2 is a
        // little worse but independent of both. Subsets of size 2:
        //   {0,1}: 2(1-ω)·1 + 2ω·0.9
        //   {0,2}: (1-ω)(1 + 1.2)
        // {0,2} wins once 1.8ω > 0.2(1-ω), i.e. ω > 0.1.
        let g = array![[1.0, 0.9, 0.0], [0.9, 1.0, 0.0], [0.0, 0.0, 1.2]];
        let low = brute_force_select(&weight_matrix(&g, 0.05).unwrap(), 2).unwrap();
        assert_eq!(low.indices, vec![0, 1]);
        let high = brute_force_select(&weight_matrix(&g, 0.3).unwrap(), 2).unwrap();
        assert_eq!(high.indices, vec![0, 2]);
    }

    #[test]
    fn zero_omega_relaxation_picks_lowest_losses() {
        let ds = crate::synth::regression_task(150, 4, 0.3, 7).unwrap();
        let pool = crate::zoo::build_pool(&ds, 40, 2).unwrap();
        let y = ds.y(crate::data::Part::Val);
        let opts = SelectOptions { brute_force_limit: 0 };
        for size in [5, 9, 17, 25, 33, 40] {
            let sel = select_subset_with(&pool, &y, size, 0.0, 11, opts).unwrap();
            assert_eq!(sel.method, SelectionMethod::Relaxation);
            assert_eq!(sel.indices, (0..size).collect::<Vec<_>>(), "size {size}");
        }
    }

    #[test]
    fn oversized_request_is_clamped() {
        let ds = crate::synth::regression_task(120, 3, 0.3, 1).unwrap();
        let pool = crate::zoo::build_pool(&ds, 12, 2).unwrap();
        let sel = select_subset(&pool, &ds.y(crate::data::Part::Val), 51, 0.2, 0).unwrap();
        assert_eq!(sel.size, 12);
        assert_eq!(sel.warnings.len(), 1);
        assert!(select_subset(&pool, &ds.y(crate::data::Part::Val), 4, 0.2, 0).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn rounding_is_permutation_equivariant(seed_ in 0u64..1000, size in 1usize..6) {
            let mut rng = seed::rng(seed_);
            let n = 6;
            let diag: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let z = Array2::from_diag(&ndarray::Array1::from(diag.clone()));
            let mut perm: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            let zp = Array2::from_shape_fn((n, n), |(i, j)| z[[perm[i], perm[j]]]);
            let base = round_solution(&z, size);
            let mut mapped: Vec<usize> = round_solution(&zp, size).iter().map(|&i| perm[i]).collect();
            mapped.sort_unstable();
            proptest::prop_assert_eq!(base, mapped);
        }

        #[test]
        fn selection_objectives_are_ordered(seed_ in 0u64..1000, omega in 0.0f64..0.5) {
            let wc = random_wc(10, omega, seed_);
            let opts = SelectOptions { brute_force_limit: 0 };
            let sel = select_from_covariance(&wc, 5, seed_, opts).unwrap();
            proptest::prop_assert!(sel.relaxed_objective <= sel.rounded_objective + 1e-6);
            proptest::prop_assert_eq!(sel.indices.len(), 5);
        }
    }
}
