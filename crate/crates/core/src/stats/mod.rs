//! Empirical distribution functions and the statistics built on them.

mod chi;
mod convergence;
mod factorization;
mod permutation;

pub use chi::{chi_hat, chi_hat_uniform};
pub use convergence::{
    convergence_diagnostic, regression_slope, write_diagnostic_csv, DiagnosticMetric, DiagnosticOptions, DiagnosticRow,
};
pub use factorization::{factorization_stat, factorization_stat_exhaustive, factorization_stat_pairs, EXHAUSTIVE_MAX_N};
pub use permutation::{permutation_independence_test, permutation_test_pairs, TestResult, DEFAULT_PERMUTATIONS, MIN_PERMUTATIONS};

use crate::error::{Error, Result};

/// Right-continuous empirical CDF over a sorted copy of the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData { what: "ECDF".into(), needed: 1, found: 0 });
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::domain("ECDF input contains NaN"));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    /// `#{v <= x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.sorted.len() as f64
    }

    pub fn count_le(&self, x: f64) -> usize {
        self.sorted.partition_point(|&v| v <= x)
    }

    /// Smallest sample value `x` with `eval(x) >= level`.
    pub fn quantile(&self, level: f64) -> f64 {
        let n = self.sorted.len();
        let k = ((level * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[k - 1]
    }

    /// `sup_x |F̂(x) - F(x)|` for a continuous reference `F`, attained at the
    /// jump points on one side or the other.
    pub fn ks_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.sorted.len() as f64;
        let mut d: f64 = 0.0;
        let mut i = 0;
        while i < self.sorted.len() {
            let x = self.sorted[i];
            let mut j = i;
            while j + 1 < self.sorted.len() && self.sorted[j + 1] == x {
                j += 1;
            }
            let f = cdf(x);
            d = d.max(((j + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs());
            i = j + 1;
        }
        d
    }

    /// Two-sample sup distance.
    pub fn two_sample_distance(&self, other: &Ecdf) -> f64 {
        self.sorted
            .iter()
            .chain(&other.sorted)
            .map(|&x| (self.eval(x) - other.eval(x)).abs())
            .fold(0.0, f64::max)
    }
}

pub fn ecdf_eval(e: &Ecdf, x: f64) -> f64 {
    e.eval(x)
}

pub fn ks_distance<F: Fn(f64) -> f64>(e: &Ecdf, cdf: F) -> f64 {
    e.ks_distance(cdf)
}

/// Default probability levels 0.05, 0.10, …, 0.95.
pub fn default_levels() -> Vec<f64> {
    (1..20).map(|k| k as f64 / 20.0).collect()
}

/// Bivariate ECDF `#{w1 <= x1[j], w2 <= x2[l]} / n` on a sorted grid,
/// row-major in `xs1`.
pub fn joint_ecdf_grid(w1: &[f64], w2: &[f64], xs1: &[f64], xs2: &[f64]) -> Result<Vec<f64>> {
    if w1.len() != w2.len() || w1.is_empty() {
        return Err(Error::domain("joint ECDF needs two non-empty columns of equal length"));
    }
    for xs in [xs1, xs2] {
        if xs.is_empty() || xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::domain("ECDF grid must be non-empty and strictly increasing"));
        }
    }
    let (m1, m2) = (xs1.len(), xs2.len());
    // cell (i, k): i grid points of xs1 lie strictly below w1
    let mut counts = vec![0u64; (m1 + 1) * (m2 + 1)];
    for (&a, &b) in w1.iter().zip(w2) {
        let i = xs1.partition_point(|&x| x < a);
        let k = xs2.partition_point(|&x| x < b);
        counts[i * (m2 + 1) + k] += 1;
    }
    let n = w1.len() as f64;
    let mut out = vec![0.0; m1 * m2];
    let mut col = vec![0u64; m2];
    for j in 0..m1 {
        let mut acc = 0u64;
        for l in 0..m2 {
            col[l] += counts[j * (m2 + 1) + l];
            acc += col[l];
            out[j * m2 + l] = acc as f64 / n;
        }
    }
    Ok(out)
}

pub(crate) fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::domain("probability levels must not be empty"));
    }
    if levels.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::domain("probability levels must lie in (0, 1)"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("probability levels must be strictly increasing"));
    }
    Ok(())
}
