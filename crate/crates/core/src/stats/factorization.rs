//! `Δ = max |F̂12(x1, x2) - F̂1(x1) F̂2(x2)|` over a grid of empirical
//! marginal quantiles.
//!
//! Each observation is reduced to a pair of cell indices against the grid, so
//! Δ is an integer computation on a `(L+1)²` contingency table and exactly
//! invariant under increasing transforms of either coordinate.

use super::{validate_levels, Ecdf};
use crate::error::{Error, Result};
use crate::simulate::NormedSample;

/// Largest `n` accepted by the O(n²) exhaustive statistic.
pub const EXHAUSTIVE_MAX_N: usize = 2000;

pub(crate) const MIN_PAIRS: usize = 10;

/// Cell index of each observation against one coordinate's quantile grid:
/// `k = #{q_j < w}`, so `w <= q_j` iff `k <= j`.
pub(crate) struct Binned {
    pub cells: Vec<u16>,
    /// `#{w <= q_j}` for each grid point.
    pub cum: Vec<u64>,
}

pub(crate) fn bin_coordinate(w: &[f64], levels: &[f64]) -> Result<Binned> {
    let e = Ecdf::new(w.to_vec())?;
    let sorted = e.sorted_values();
    if sorted.first() == sorted.last() {
        return Err(Error::Degenerate("all values tied in a coordinate".into()));
    }
    let grid: Vec<f64> = levels.iter().map(|&p| e.quantile(p)).collect();
    let cells = w.iter().map(|&x| grid.partition_point(|&q| q < x) as u16).collect();
    let cum = grid.iter().map(|&q| e.count_le(q) as u64).collect();
    Ok(Binned { cells, cum })
}

/// `max_{j,l} |n c12 - c1 c2|`, the Δ numerator in units of `1/n²`.
pub(crate) fn max_deviation(c1: &[u64], c2: &[u64], cells1: &[u16], cells2: &[u16], table: &mut Vec<u64>) -> u128 {
    let m = c1.len();
    let side = m + 1;
    table.clear();
    table.resize(side * side, 0);
    for (&a, &b) in cells1.iter().zip(cells2) {
        table[a as usize * side + b as usize] += 1;
    }
    // 2-D prefix sums in place
    for a in 0..side {
        for b in 1..side {
            table[a * side + b] += table[a * side + b - 1];
        }
    }
    for a in 1..side {
        for b in 0..side {
            table[a * side + b] += table[(a - 1) * side + b];
        }
    }
    let n = cells1.len() as i128;
    let mut best: u128 = 0;
    for j in 0..m {
        for l in 0..m {
            let joint = table[j * side + l] as i128;
            let dev = (n * joint - c1[j] as i128 * c2[l] as i128).unsigned_abs();
            best = best.max(dev);
        }
    }
    best
}

pub(crate) fn check_pairs(w1: &[f64], w2: &[f64]) -> Result<()> {
    if w1.len() != w2.len() {
        return Err(Error::domain(format!("column lengths differ: {} vs {}", w1.len(), w2.len())));
    }
    if w1.len() < MIN_PAIRS {
        return Err(Error::InsufficientData { what: "factorization statistic".into(), needed: MIN_PAIRS, found: w1.len() });
    }
    Ok(())
}

/// Δ on the grid of empirical marginal quantiles at `levels`.
pub fn factorization_stat_pairs(w1: &[f64], w2: &[f64], levels: &[f64]) -> Result<f64> {
    check_pairs(w1, w2)?;
    validate_levels(levels)?;
    let b1 = bin_coordinate(w1, levels)?;
    let b2 = bin_coordinate(w2, levels)?;
    let mut table = Vec::new();
    let dev = max_deviation(&b1.cum, &b2.cum, &b1.cells, &b2.cells, &mut table);
    let n = w1.len() as f64;
    Ok(dev as f64 / (n * n))
}

pub fn factorization_stat(pairs: &NormedSample, levels: &[f64]) -> Result<f64> {
    factorization_stat_pairs(&pairs.w1, &pairs.w2, levels)
}

/// Δ over every cell `(w1_i, w2_j)` of the sample, O(n²) time and memory.
pub fn factorization_stat_exhaustive(w1: &[f64], w2: &[f64]) -> Result<f64> {
    check_pairs(w1, w2)?;
    let n = w1.len();
    if n > EXHAUSTIVE_MAX_N {
        return Err(Error::domain(format!("exhaustive statistic limited to n <= {EXHAUSTIVE_MAX_N}, got {n}")));
    }
    // rank = #{w <= x} - 1, so ties share the index of their last copy
    let rank = |w: &[f64]| -> Result<Vec<usize>> {
        let e = Ecdf::new(w.to_vec())?;
        Ok(w.iter().map(|&x| e.count_le(x) - 1).collect())
    };
    let r1 = rank(w1)?;
    let r2 = rank(w2)?;
    let mut table = vec![0u32; n * n];
    for (&a, &b) in r1.iter().zip(&r2) {
        table[a * n + b] += 1;
    }
    for a in 0..n {
        for b in 1..n {
            table[a * n + b] += table[a * n + b - 1];
        }
    }
    for a in 1..n {
        for b in 0..n {
            table[a * n + b] += table[(a - 1) * n + b];
        }
    }
    let marg1: Vec<u64> = (0..n).map(|a| table[a * n + n - 1] as u64).collect();
    let marg2: Vec<u64> = (0..n).map(|b| table[(n - 1) * n + b] as u64).collect();
    let nn = n as i128;
    let mut best: u128 = 0;
    for &a in &r1 {
        for &b in &r2 {
            let dev = (nn * table[a * n + b] as i128 - marg1[a] as i128 * marg2[b] as i128).unsigned_abs();
            best = best.max(dev);
        }
    }
    Ok(best as f64 / (n as f64 * n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use crate::stats::default_levels;
    use proptest::prelude::*;

    /// Direct double loop over grid cells with plain counting.
    fn brute_force(w1: &[f64], w2: &[f64], levels: &[f64]) -> f64 {
        let n = w1.len();
        let quant = |w: &[f64], p: f64| {
            let mut s = w.to_vec();
            s.sort_by(f64::total_cmp);
            let k = ((p * n as f64).ceil() as usize).max(1);
            s[k - 1]
        };
        let mut best: f64 = 0.0;
        for &p1 in levels {
            let q1 = quant(w1, p1);
            for &p2 in levels {
                let q2 = quant(w2, p2);
                let f1 = w1.iter().filter(|&&x| x <= q1).count() as f64 / n as f64;
                let f2 = w2.iter().filter(|&&x| x <= q2).count() as f64 / n as f64;
                let f12 = w1.iter().zip(w2).filter(|(&a, &b)| a <= q1 && b <= q2).count() as f64 / n as f64;
                best = best.max((f12 - f1 * f2).abs());
            }
        }
        best
    }

    #[test]
    fn ten_point_sample_matches_brute_force() {
        let w1 = [0.3, -1.2, 2.2, 0.9, -0.4, 1.7, -2.0, 0.1, 1.1, -0.8];
        let w2 = [1.0, -0.5, 0.7, 2.1, -1.9, 0.2, -0.1, 1.4, -1.1, 0.6];
        let levels = [0.2, 0.5, 0.8];
        let got = factorization_stat_pairs(&w1, &w2, &levels).unwrap();
        assert!((got - brute_force(&w1, &w2, &levels)).abs() < 1e-15);
        let levels = default_levels();
        let got = factorization_stat_pairs(&w1, &w2, &levels).unwrap();
        assert!((got - brute_force(&w1, &w2, &levels)).abs() < 1e-15);
    }

    #[test]
    fn comonotone_bound() {
        let n = 1000;
        let mut rng = CounterRng::new(1, 0);
        let w: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let d = factorization_stat_pairs(&w, &w, &[0.5]).unwrap();
        assert!((d - 0.25).abs() <= 1.0 / n as f64);
    }

    #[test]
    fn independent_uniforms_small() {
        for seed in 0..5 {
            let mut rng = CounterRng::new(seed, 0);
            let n = 100_000;
            let w1: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            let w2: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            let d = factorization_stat_pairs(&w1, &w2, &default_levels()).unwrap();
            assert!(d < 0.01, "seed {seed}: {d}");
        }
    }

    #[test]
    fn degenerate_and_small_samples() {
        let tied = vec![1.0; 20];
        let other: Vec<f64> = (0..20).map(f64::from).collect();
        assert!(matches!(factorization_stat_pairs(&tied, &other, &[0.5]), Err(Error::Degenerate(_))));
        assert!(matches!(factorization_stat_pairs(&other[..5], &other[..5], &[0.5]), Err(Error::InsufficientData { .. })));
        assert!(factorization_stat_pairs(&other, &other, &[]).is_err());
        assert!(factorization_stat_pairs(&other, &other, &[0.5, 0.4]).is_err());
    }

    #[test]
    fn exhaustive_bounds_grid_version() {
        let mut rng = CounterRng::new(4, 0);
        let n = 300;
        let w1: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let w2: Vec<f64> = w1.iter().map(|&u| u + 0.3 * rng.uniform()).collect();
        let full = factorization_stat_exhaustive(&w1, &w2).unwrap();
        let grid = factorization_stat_pairs(&w1, &w2, &default_levels()).unwrap();
        assert!(full >= grid - 1e-15);
        // the exhaustive sup over sample cells equals a brute-force loop
        let mut best: f64 = 0.0;
        for &a in &w1 {
            for &b in &w2 {
                let f1 = w1.iter().filter(|&&x| x <= a).count() as f64 / n as f64;
                let f2 = w2.iter().filter(|&&x| x <= b).count() as f64 / n as f64;
                let f12 = w1.iter().zip(&w2).filter(|(&x, &y)| x <= a && y <= b).count() as f64 / n as f64;
                best = best.max((f12 - f1 * f2).abs());
            }
        }
        assert!((full - best).abs() < 1e-14);
        assert!(factorization_stat_exhaustive(&vec![0.0; 2001], &vec![0.0; 2001]).is_err());
    }

    proptest! {
        #[test]
        fn invariant_under_monotone_transforms(seed in 0u64..1000) {
            let mut rng = CounterRng::new(seed, 0);
            let n = 500;
            let w1: Vec<f64> = (0..n).map(|_| rng.uniform() * 4.0 - 2.0).collect();
            let w2: Vec<f64> = w1.iter().map(|&x| 0.5 * x + rng.uniform() * 3.0 - 1.5).collect();
            let levels = default_levels();
            let before = factorization_stat_pairs(&w1, &w2, &levels).unwrap();
            let t1: Vec<f64> = w1.iter().map(|x| x.exp()).collect();
            let t2: Vec<f64> = w2.iter().map(|x| x * x * x).collect();
            let after = factorization_stat_pairs(&t1, &t2, &levels).unwrap();
            prop_assert_eq!(before, after);
            prop_assert!((0.0..=0.25).contains(&before));
        }
    }
}
