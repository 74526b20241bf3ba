use std::fs;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{ConfigError, ExperimentConfig, OutputFormat, Synthetic};
use super::report::Findings;
use super::Failure;
use crate::data::{fit_dataset, load_csv, residual_diagnostic, residuals, write_residuals_csv, CsvOptions};
use crate::error::Result;
use crate::limits::{factorization_gap, h_surface, write_surface_csv, GapResult};
use crate::models::{CiModel, Coordinate};
use crate::rng::CounterRng;
use crate::simulate::{
    apply_deterministic_norming, apply_random_norming, draw_exceedances, write_exceedance_binary,
    write_exceedance_csv, NormedSample,
};
use crate::stats::{chi_hat, factorization_stat, joint_ecdf_grid, permutation_independence_test, Ecdf};

fn write_hashed(path: &Path, bytes: &[u8]) -> Result<String> {
    fs::write(path, bytes)?;
    Ok(Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub(crate) fn simulate(cfg: &ExperimentConfig, model: &CiModel, out: &Path, f: &mut Findings) -> Result<()> {
    let ts = cfg.run.t_list.clone().unwrap_or_else(|| vec![cfg.run.t]);
    let mut files = std::collections::BTreeMap::new();
    for &t in &ts {
        let sample = draw_exceedances(model, t, cfg.run.n, cfg.run.seed)?;
        for format in &cfg.io.formats {
            let mut buf = Vec::new();
            let name = match format {
                OutputFormat::Csv => {
                    write_exceedance_csv(&sample, &mut buf)?;
                    format!("sample_t{t}.csv")
                }
                OutputFormat::Binary => {
                    write_exceedance_binary(&sample, &mut buf)?;
                    format!("sample_t{t}.bin")
                }
            };
            let hash = write_hashed(&out.join(&name), &buf)?;
            files.insert(name, hash);
        }
    }
    f.metric("n", cfg.run.n);
    f.metric("t_list", &ts);
    f.metric("model_id", model.model_id());
    f.metric("files_sha256", files);
    Ok(())
}

fn independence(cfg: &ExperimentConfig, normed: &NormedSample, f: &mut Findings) -> Result<f64> {
    let levels = &cfg.analysis.levels;
    let delta = factorization_stat(normed, levels)?;
    let test = permutation_independence_test(normed, levels, cfg.analysis.b, cfg.run.seed)?;
    f.metric("delta", delta);
    f.metric("p_value", test.p_value);
    f.metric("b", test.b);
    let th = &cfg.analysis.thresholds;
    if let Some(max) = th.delta_max {
        f.verdict("delta", delta < max);
    }
    if let Some(level) = th.significance {
        f.metric("independence_rejected", test.rejects_at(level));
    }
    Ok(test.p_value)
}

pub(crate) fn verify_rn(cfg: &ExperimentConfig, model: &CiModel, f: &mut Findings) -> Result<()> {
    let sample = draw_exceedances(model, cfg.run.t, cfg.run.n, cfg.run.seed)?;
    let normed = apply_random_norming(&sample, model)?;
    f.metric("t", cfg.run.t);
    f.metric("n", normed.len());
    let p = independence(cfg, &normed, f)?;
    let ks1 = Ecdf::new(normed.w1.clone())?.ks_distance(|x| model.noise1.cdf(x));
    let ks2 = Ecdf::new(normed.w2.clone())?.ks_distance(|x| model.noise2.cdf(x));
    f.metric("ks1", ks1);
    f.metric("ks2", ks2);
    let th = &cfg.analysis.thresholds;
    if let Some(level) = th.significance {
        f.verdict("independence", p > level);
    }
    if let Some(max) = th.ks_max {
        f.verdict("ks", ks1.max(ks2) < max);
    }
    Ok(())
}

pub(crate) fn verify_dn(cfg: &ExperimentConfig, model: &CiModel, out: &Path, f: &mut Findings) -> Result<()> {
    let sample = draw_exceedances(model, cfg.run.t, cfg.run.n, cfg.run.seed)?;
    let normed = apply_deterministic_norming(&sample, model)?;
    f.metric("t", cfg.run.t);
    f.metric("n", normed.len());
    let p = independence(cfg, &normed, f)?;

    let gap = factorization_gap(model, &cfg.grid(), &cfg.analysis.quad)?;
    let ecdf = joint_ecdf_grid(&normed.w1, &normed.w2, &gap.points1, &gap.points2)?;
    let sup = ecdf.iter().zip(&gap.table).map(|(e, r)| (e - r.h).abs()).fold(0.0, f64::max);
    f.metric("ecdf_sup", sup);
    gap_metrics(&gap, f);
    write_table(&gap, &out.join("gap_table.csv"))?;

    let th = &cfg.analysis.thresholds;
    if let Some(max) = th.ecdf_max {
        f.verdict("ecdf", sup < max);
    }
    if let (Some(level), Some(tol)) = (th.significance, th.gap_tol) {
        // rejection is expected exactly when the limit does not factorize
        f.verdict("factorization_consistent", (p <= level) == (gap.gap > tol));
    }
    Ok(())
}

fn gap_metrics(gap: &GapResult, f: &mut Findings) {
    f.metric("gap", gap.gap);
    f.metric("gap_argmax", gap.argmax);
    f.metric("gap_argmax_levels", gap.argmax_levels);
}

fn write_table(gap: &GapResult, path: &Path) -> Result<()> {
    write_surface_csv(&gap.table, fs::File::create(path)?)
}

pub(crate) fn limit_h(cfg: &ExperimentConfig, model: &CiModel, out: &Path, f: &mut Findings) -> Result<()> {
    let quad = &cfg.analysis.quad;
    let grid = cfg.grid();
    let xs1 = match &cfg.analysis.x1_grid {
        Some(g) => g.clone(),
        None => grid.points(model, Coordinate::One, quad)?,
    };
    let xs2 = match &cfg.analysis.x2_grid {
        Some(g) => g.clone(),
        None => grid.points(model, Coordinate::Two, quad)?,
    };
    let rows = h_surface(model, &xs1, &xs2, quad)?;
    write_surface_csv(&rows, fs::File::create(out.join("h_surface.csv"))?)?;
    f.metric("rows", rows.len());
    f.metric("h_min", rows.iter().map(|r| r.h).fold(f64::INFINITY, f64::min));
    f.metric("h_max", rows.iter().map(|r| r.h).fold(f64::NEG_INFINITY, f64::max));
    f.metric("max_abs_diff", rows.iter().map(|r| r.diff.abs()).fold(0.0, f64::max));
    Ok(())
}

pub(crate) fn gap(cfg: &ExperimentConfig, model: &CiModel, out: &Path, f: &mut Findings) -> Result<()> {
    let gap = factorization_gap(model, &cfg.grid(), &cfg.analysis.quad)?;
    gap_metrics(&gap, f);
    write_table(&gap, &out.join("gap_table.csv"))?;
    let expected_zero = model.erv1.is_constant() || model.erv2.is_constant();
    f.metric("gap_expected_zero", expected_zero);
    if let Some(tol) = cfg.analysis.thresholds.gap_tol {
        f.verdict("gap_iff_constant_coordinate", (gap.gap <= tol) == expected_zero);
    }
    Ok(())
}

/// Synthetic trivariate sample for the χ ladder.
fn chi_sample(cfg: &ExperimentConfig, model: &CiModel) -> Result<[Vec<f64>; 3]> {
    let (n, seed) = (cfg.run.n, cfg.run.seed);
    Ok(match cfg.chi.synthetic {
        Synthetic::Model => {
            let s = draw_exceedances(model, 1.0, n, seed)?;
            [s.x0, s.x1, s.x2]
        }
        Synthetic::Comonotone => {
            let x: Vec<f64> = (0..n as u64).into_par_iter().map(|k| 1.0 / CounterRng::new(seed, k).uniform()).collect();
            [x.clone(), x.clone(), x]
        }
        Synthetic::Independent => {
            let rows: Vec<[f64; 3]> = (0..n as u64)
                .into_par_iter()
                .map(|k| {
                    let mut rng = CounterRng::new(seed, k);
                    [rng.uniform(), rng.uniform(), rng.uniform()]
                })
                .collect();
            [0, 1, 2].map(|j| rows.iter().map(|r| r[j]).collect())
        }
    })
}

pub(crate) fn chi(cfg: &ExperimentConfig, model: &CiModel, f: &mut Findings) -> Result<()> {
    let [x0, x1, x2] = chi_sample(cfg, model)?;
    let levels = &cfg.chi.levels;
    let values = levels.iter().map(|&p| chi_hat(&x0, &x1, &x2, p)).collect::<Result<Vec<_>>>()?;
    f.metric("n", cfg.run.n);
    f.metric("levels", levels);
    f.metric("chi", &values);
    let reference: Option<Vec<f64>> = match cfg.chi.synthetic {
        Synthetic::Model => None,
        Synthetic::Comonotone => Some(vec![1.0; levels.len()]),
        Synthetic::Independent => Some(levels.iter().map(|p| (1.0 - p) * (1.0 - p)).collect()),
    };
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    f.metric("strictly_decreasing", decreasing);
    if let Some(r) = &reference {
        f.metric("reference", r);
    }
    if let Some(tol) = cfg.analysis.thresholds.chi_tol {
        match &reference {
            Some(r) => f.verdict("reference", values.iter().zip(r).all(|(v, r)| (v - r).abs() <= tol)),
            None => f.verdict("strictly_decreasing", decreasing),
        }
    }
    Ok(())
}

pub(crate) fn diagnose(cfg: &ExperimentConfig, out: &Path, f: &mut Findings) -> std::result::Result<(), Failure> {
    let d = &cfg.data;
    let Some(path) = &d.path else {
        return Err(ConfigError("data.path: required by diagnose".into()).into());
    };
    let opts = CsvOptions { delimiter: cfg.delimiter()? };
    let columns = [d.value_columns[0].as_str(), d.value_columns[1].as_str()];
    let data = load_csv(path, &d.conditioning_column, columns, &opts)?;
    f.metric("rows", data.len());
    f.metric("dropped", data.dropped);
    let fits = fit_dataset(&data, d.p_t, d.family)?;
    crate::data::write_json(&out.join("fit.json"), &fits)?;
    let res = residuals(&data, &fits)?;
    write_residuals_csv(&out.join("residuals.csv"), &res)?;
    let test = residual_diagnostic(&data, &fits, &cfg.analysis.levels, cfg.analysis.b, cfg.run.seed)?;

    f.metric("exceedances", fits.exceedances);
    f.metric("threshold", fits.threshold);
    for (name, c) in [("1", &fits.coordinate1), ("2", &fits.coordinate2)] {
        f.metric(format!("rho{name}"), c.erv.rho);
        f.metric(format!("kappa{name}"), c.erv.kappa);
        f.metric(format!("a{name}"), c.erv.a);
        f.metric(format!("location{name}"), c.noise.location);
        f.metric(format!("objective{name}"), c.objective);
    }
    f.metric("statistic", test.statistic);
    f.metric("p_value", test.p_value);
    f.metric("b", test.b);
    if let Some(level) = cfg.analysis.thresholds.significance {
        f.verdict("independence", test.p_value > level);
    }
    Ok(())
}
