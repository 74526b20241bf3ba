//! Permutation test of independence based on the factorization statistic.
//!
//! Replicate `r` permutes the second coordinate with its own counter stream
//! keyed by `(seed, r)`, so the p-value does not depend on how replicates are
//! scheduled across threads.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::factorization::{bin_coordinate, check_pairs, max_deviation};
use super::validate_levels;
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::simulate::NormedSample;

pub const DEFAULT_PERMUTATIONS: usize = 999;
pub const MIN_PERMUTATIONS: usize = 99;

const DOMAIN_PERMUTATION: u64 = 0x5045_524d;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub b: usize,
    pub seed: u64,
}

impl TestResult {
    pub fn rejects_at(&self, level: f64) -> bool {
        self.p_value <= level
    }
}

/// `p = (1 + #{Δ_perm >= Δ_obs}) / (b + 1)`.
pub fn permutation_test_pairs(w1: &[f64], w2: &[f64], levels: &[f64], b: usize, seed: u64) -> Result<TestResult> {
    check_pairs(w1, w2)?;
    validate_levels(levels)?;
    if b < MIN_PERMUTATIONS {
        return Err(Error::domain(format!("permutation count must be >= {MIN_PERMUTATIONS}, got {b}")));
    }
    let b1 = bin_coordinate(w1, levels)?;
    let b2 = bin_coordinate(w2, levels)?;
    let mut table = Vec::new();
    let observed = max_deviation(&b1.cum, &b2.cum, &b1.cells, &b2.cells, &mut table);

    let exceed: usize = (0..b)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(b2.cells.len()), Vec::new()),
            |(perm, table), r| {
                perm.clear();
                perm.extend_from_slice(&b2.cells);
                let mut rng = CounterRng::with_domain(seed, DOMAIN_PERMUTATION, r as u64);
                perm.shuffle(&mut rng);
                usize::from(max_deviation(&b1.cum, &b2.cum, &b1.cells, perm, table) >= observed)
            },
        )
        .sum();

    let n = w1.len();
    Ok(TestResult {
        statistic: observed as f64 / (n as f64 * n as f64),
        p_value: (1 + exceed) as f64 / (b + 1) as f64,
        n,
        b,
        seed,
    })
}

pub fn permutation_independence_test(pairs: &NormedSample, levels: &[f64], b: usize, seed: u64) -> Result<TestResult> {
    permutation_test_pairs(&pairs.w1, &pairs.w2, levels, b, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{default_levels, factorization_stat_pairs};

    fn uniforms(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = CounterRng::new(seed, 0);
        (0..n).map(|_| rng.uniform()).collect()
    }

    #[test]
    fn statistic_matches_factorization_stat() {
        let w1 = uniforms(1, 2000);
        let w2 = uniforms(2, 2000);
        let levels = default_levels();
        let r = permutation_test_pairs(&w1, &w2, &levels, 99, 5).unwrap();
        assert_eq!(r.statistic, factorization_stat_pairs(&w1, &w2, &levels).unwrap());
        assert!(r.p_value >= 1.0 / 100.0 && r.p_value <= 1.0);
        assert_eq!((r.n, r.b, r.seed), (2000, 99, 5));
    }

    #[test]
    fn comonotone_gets_minimal_p_value() {
        let w = uniforms(3, 10_000);
        let r = permutation_test_pairs(&w, &w, &default_levels(), 999, 1).unwrap();
        assert_eq!(r.p_value, 1.0 / 1000.0);
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let w1 = uniforms(5, 20);
        let w2 = uniforms(6, 20);
        let levels = default_levels();
        let a = permutation_test_pairs(&w1, &w2, &levels, 999, 77).unwrap();
        for k in [1, 2, 8] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap();
            let b = pool.install(|| permutation_test_pairs(&w1, &w2, &levels, 999, 77).unwrap());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn too_few_permutations() {
        let w = uniforms(1, 50);
        assert!(permutation_test_pairs(&w, &w, &[0.5], 98, 0).is_err());
    }

    #[test]
    fn size_calibration() {
        let levels = default_levels();
        let mut rejections = 0;
        for seed in 0..100 {
            let w1 = uniforms(1000 + seed, 2000);
            let w2 = uniforms(2000 + seed, 2000);
            if permutation_test_pairs(&w1, &w2, &levels, 99, seed).unwrap().rejects_at(0.01) {
                rejections += 1;
            }
        }
        // Binomial(100, 0.01): P(X > 4) < 0.004
        assert!(rejections <= 4, "{rejections}/100");
    }
}
