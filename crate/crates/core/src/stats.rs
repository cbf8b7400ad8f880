//! Small statistics helpers shared across metric modules.

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pearson correlation. Errors when either column is constant (the
/// correlation is undefined there, and silently returning 0 would corrupt
/// downstream model-selection comparisons).
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Input(format!(
            "pearson: length mismatch {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Degenerate("pearson: fewer than two points".into()));
    }
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "pearson: constant column, correlation undefined".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Ranks with ties averaged (the usual midrank convention).
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("no NaN in rank input"));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson on midranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    pearson(&ranks(xs), &ranks(ys))
}

/// Pearson chi-square statistic for independence on a contingency table
/// (rows x cols of counts).
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<f64> {
    let rows = table.len();
    let cols = table.first().map(|r| r.len()).unwrap_or(0);
    if rows < 2 || cols < 2 {
        return Err(Error::Input("chi-square: table needs at least 2x2".into()));
    }
    let total: u64 = table.iter().flatten().sum();
    if total == 0 {
        return Err(Error::Degenerate("chi-square: empty table".into()));
    }
    let row_sums: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<u64> = (0..cols).map(|c| table.iter().map(|r| r[c]).sum()).collect();
    let mut stat = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let expected = row_sums[r] as f64 * col_sums[c] as f64 / total as f64;
            if expected > 0.0 {
                let d = table[r][c] as f64 - expected;
                stat += d * d / expected;
            }
        }
    }
    Ok(stat)
}

/// Goodness-of-fit chi-square against a uniform distribution over `k` cells.
pub fn chi_square_uniform(counts: &[u64]) -> Result<f64> {
    if counts.len() < 2 {
        return Err(Error::Input("chi-square: need at least 2 cells".into()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Degenerate("chi-square: empty counts".into()));
    }
    let expected = total as f64 / counts.len() as f64;
    Ok(counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_matches_hand_computation() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 6.0, 8.0];
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        let ys_neg = [8.0, 6.0, 4.0, 2.0];
        assert!((pearson(&xs, &ys_neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_rejects_constant_columns() {
        let xs = [1.0, 1.0, 1.0];
        let ys = [2.0, 3.0, 4.0];
        assert!(matches!(pearson(&xs, &ys), Err(Error::Degenerate(_))));
    }

    #[test]
    fn spearman_is_invariant_to_monotone_transforms() {
        let xs = [0.1f64, 0.5, 0.2, 0.9, 0.7];
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(3) * 10.0 + 2.0).collect();
        assert!((spearman(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranks_average_ties() {
        let r = ranks(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(r, vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn chi_square_zero_for_perfectly_independent_table() {
        let table = vec![vec![10u64, 20], vec![10, 20]];
        assert!(chi_square_independence(&table).unwrap() < 1e-12);
    }

    #[test]
    fn chi_square_large_for_dependent_table() {
        let table = vec![vec![50u64, 0], vec![0, 50]];
        assert!(chi_square_independence(&table).unwrap() > 50.0);
    }
}
