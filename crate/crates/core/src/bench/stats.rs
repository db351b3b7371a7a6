use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, StackError};

/// Smallest number of nonzero differences accepted by the signed-rank test.
pub const WILCOXON_MIN_N: usize = 6;
/// Score given to methods worse than Single-Best when Single-Best is best.
pub const WORSE_PENALTY: f64 = -10.0;

/// Ascending ranks starting at 1; tied values share the mean of their
/// positions.
pub fn rank_with_ties(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mean;
        }
        i = j + 1;
    }
    ranks
}

/// Mean rank of each method over datasets; `losses[d][m]`.
pub fn average_rank(losses: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = losses.first().map_or(0, Vec::len);
    let mut acc = vec![0.0; m];
    for (d, row) in losses.iter().enumerate() {
        if row.len() != m {
            return Err(StackError::shape(format!("dataset {d} has {} methods, expected {m}", row.len())));
        }
        if let Some(j) = row.iter().position(|v| v.is_nan()) {
            return Err(StackError::invalid(format!("loss of method {j} on dataset {d} is NaN")));
        }
        for (a, r) in acc.iter_mut().zip(rank_with_ties(row)) {
            *a += r;
        }
    }
    let n = losses.len().max(1) as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Maps each loss so that Single-Best scores 0 and the best method 1.
/// When Single-Best is itself the best, strictly worse methods score −10;
/// otherwise scores are floored at −10. Equal losses everywhere give 0.
pub fn normalized_improvement(losses: &[f64], single_best: usize) -> Result<Vec<f64>> {
    let sb = *losses
        .get(single_best)
        .ok_or_else(|| StackError::invalid(format!("single-best index {single_best} outside {} methods", losses.len())))?;
    if losses.iter().any(|v| v.is_nan()) {
        return Err(StackError::invalid("normalized improvement got a NaN loss"));
    }
    let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(losses
        .iter()
        .map(|&l| {
            if sb == best {
                if l > sb {
                    WORSE_PENALTY
                } else {
                    0.0
                }
            } else {
                ((sb - l) / (sb - best)).max(WORSE_PENALTY)
            }
        })
        .collect())
}

/// Two-sided p-value of the Wilcoxon signed-rank test by normal
/// approximation with continuity and tie corrections. Zero differences are
/// dropped first.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<f64> {
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(StackError::invalid("signed-rank test got a NaN difference"));
    }
    let nz: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nz.len();
    if n < WILCOXON_MIN_N {
        return Err(StackError::invalid(format!(
            "signed-rank test needs at least {WILCOXON_MIN_N} nonzero differences, got {n}"
        )));
    }
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks = rank_with_ties(&abs);
    let w_plus: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if !(var > 0.0) {
        return Ok(1.0);
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let p = 2.0 * (1.0 - Normal::standard().cdf(z));
    Ok(p.min(1.0))
}

/// Spearman rank correlation with tie-averaged ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(StackError::invalid("spearman needs two equal-length series of at least 2 values"));
    }
    let ra = rank_with_ties(a);
    let rb = rank_with_ties(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (va * vb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact two-sided p-value by enumerating all 2ⁿ sign assignments.
    fn exact_wilcoxon(diffs: &[f64]) -> f64 {
        let nz: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
        let ranks = rank_with_ties(&nz.iter().map(|d| d.abs()).collect::<Vec<_>>());
        let n = nz.len();
        let observed: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
        let mean = ranks.iter().sum::<f64>() / 2.0;
        let dev = (observed - mean).abs();
        let mut extreme = 0usize;
        for bits in 0u32..(1 << n) {
            let w: f64 = (0..n).filter(|i| bits >> i & 1 == 1).map(|i| ranks[i]).sum();
            if (w - mean).abs() >= dev - 1e-9 {
                extreme += 1;
            }
        }
        extreme as f64 / (1u64 << n) as f64
    }

    #[test]
    fn rank_examples() {
        assert_eq!(average_rank(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap(), vec![1.5, 1.5]);
        assert_eq!(average_rank(&[vec![1.0, 1.0, 2.0]]).unwrap(), vec![1.5, 1.5, 3.0]);
        assert!(average_rank(&[vec![1.0, f64::NAN]]).is_err());
        assert!(average_rank(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn improvement_examples() {
        let s = normalized_improvement(&[0.5, 0.3, 0.4, 0.9], 0).unwrap();
        assert_eq!(s[0], 0.0);
        assert_eq!(s[1], 1.0);
        assert!((s[2] - 0.5).abs() < 1e-12);
        assert!((s[3] + 2.0).abs() < 1e-12);
        assert_eq!(normalized_improvement(&[0.2, 0.3, 0.2], 0).unwrap(), vec![0.0, -10.0, 0.0]);
        assert_eq!(normalized_improvement(&[0.4, 0.4], 1).unwrap(), vec![0.0, 0.0]);
        assert_eq!(normalized_improvement(&[1.0, 0.0, 100.0], 0).unwrap()[2], -10.0);
        assert!(normalized_improvement(&[0.1], 3).is_err());
    }

    #[test]
    fn wilcoxon_examples() {
        let all_pos: Vec<f64> = (1..=20).map(f64::from).collect();
        assert!(wilcoxon_signed_rank(&all_pos).unwrap() < 0.001);
        let sym = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0];
        assert!(wilcoxon_signed_rank(&sym).unwrap() > 0.99);
        assert!(wilcoxon_signed_rank(&[1.0, 2.0, -3.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn normal_approximation_tracks_exact_enumeration() {
        let cases: [&[f64]; 4] = [
            &[1.2, -0.4, 2.2, 3.1, 0.7, -1.5, 2.8, 1.9, 0.3, 2.5, -0.2, 1.1],
            &[0.5, 0.9, -1.3, 2.0, 1.7, 0.8, -0.6, 1.4, 2.2, 0.1],
            &[-1.0, -2.0, 3.0, 1.0, 2.0, -4.0, 5.0, 6.0, 1.5, -0.5, 0.25],
            &[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, -8.0],
        ];
        for d in cases {
            let approx = wilcoxon_signed_rank(d).unwrap();
            let exact = exact_wilcoxon(d);
            assert!((approx - exact).abs() < 0.03, "{approx} vs {exact}");
        }
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    proptest::proptest! {
        #[test]
        fn ranks_sum_to_triangle(v in proptest::collection::vec(0.0f64..3.0, 1..12)) {
            let r = rank_with_ties(&v.iter().map(|x| (x * 4.0).round()).collect::<Vec<_>>());
            let m = v.len() as f64;
            proptest::prop_assert!((r.iter().sum::<f64>() - m * (m + 1.0) / 2.0).abs() < 1e-9);
        }

        #[test]
        fn improvement_is_scale_invariant(v in proptest::collection::vec(0.01f64..3.0, 2..8), c in 0.1f64..50.0) {
            let a = normalized_improvement(&v, 0).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let b = normalized_improvement(&scaled, 0).unwrap();
            for (x, y) in a.iter().zip(&b) {
                proptest::prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
