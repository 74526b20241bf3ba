//! How fast a sampled statistic approaches its limit as the level `t` grows.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{factorization_stat_pairs, permutation_test_pairs, Ecdf};
use crate::error::{Error, Result};
use crate::limits::{marginal_h, marginal_h_quantile, QuadOptions};
use crate::models::{CiModel, Coordinate};
use crate::simulate::{apply_norming, draw_exceedances, NormingMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticMetric {
    /// Δ, with a permutation p-value when a replicate count is given.
    Factorization,
    /// Sup distance of one coordinate's ECDF to its limit marginal: `G_i`
    /// under random norming, `H_i` under deterministic norming. The latter
    /// is evaluated at the `H_i`-quantiles of the levels.
    Ks(Coordinate),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticOptions {
    pub levels: Vec<f64>,
    pub permutations: Option<usize>,
    pub quad: QuadOptions,
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        Self { levels: super::default_levels(), permutations: None, quad: QuadOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub n: usize,
    pub statistic: f64,
    pub p_value: Option<f64>,
}

/// One row per level. The same seed is reused at every `t`, so consecutive
/// rows share their underlying uniforms and differ only through `t`.
pub fn convergence_diagnostic(
    model: &CiModel,
    t_list: &[f64],
    n: usize,
    seed: u64,
    mode: NormingMode,
    metric: DiagnosticMetric,
    opts: &DiagnosticOptions,
) -> Result<Vec<DiagnosticRow>> {
    if t_list.is_empty() {
        return Err(Error::domain("t_list must not be empty"));
    }
    if t_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("t_list must be strictly increasing"));
    }
    let h_grid = match (mode, metric) {
        (NormingMode::Deterministic, DiagnosticMetric::Ks(i)) => Some(
            opts.levels
                .iter()
                .map(|&p| {
                    let x = marginal_h_quantile(model, i, p, &opts.quad)?;
                    Ok((x, marginal_h(model, i, x, &opts.quad)?))
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => None,
    };
    t_list
        .iter()
        .map(|&t| {
            let sample = draw_exceedances(model, t, n, seed)?;
            let w = apply_norming(&sample, model, mode)?;
            let (statistic, p_value) = match metric {
                DiagnosticMetric::Factorization => match opts.permutations {
                    Some(b) => {
                        let r = permutation_test_pairs(&w.w1, &w.w2, &opts.levels, b, seed)?;
                        (r.statistic, Some(r.p_value))
                    }
                    None => (factorization_stat_pairs(&w.w1, &w.w2, &opts.levels)?, None),
                },
                DiagnosticMetric::Ks(i) => {
                    let col = if i == Coordinate::One { w.w1 } else { w.w2 };
                    let e = Ecdf::new(col)?;
                    let d = match &h_grid {
                        Some(grid) => grid.iter().map(|&(x, h)| (e.eval(x) - h).abs()).fold(0.0, f64::max),
                        None => {
                            let law = *model.noise(i);
                            e.ks_distance(|x| law.cdf(x))
                        }
                    };
                    (d, None)
                }
            };
            Ok(DiagnosticRow { t, n, statistic, p_value })
        })
        .collect()
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Columns `t,n,statistic,p_value`; a missing p-value is an empty field.
pub fn write_diagnostic_csv<W: Write>(rows: &[DiagnosticRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "n", "statistic", "p_value"])?;
    for r in rows {
        let p = r.p_value.map(|p| p.to_string()).unwrap_or_default();
        w.write_record([r.t.to_string(), r.n.to_string(), r.statistic.to_string(), p])?;
    }
    w.flush()?;
    Ok(())
}
