//! Independence check on fitted-norming residuals of exceedance rows.

use std::fs::File;
use std::path::Path;

use super::fit::FittedNorming;
use super::Dataset;
use crate::error::{Error, Result};
use crate::stats::{permutation_test_pairs, TestResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// Pareto-scale conditioning value of each exceedance row.
    pub x0: Vec<f64>,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
}

/// Residuals `ẑ_i = (y_i - β̂_i(x0))/α̂_i(x0) - loc_i` on the rows above the
/// fitted threshold.
pub fn residuals(data: &Dataset, fits: &FittedNorming) -> Result<Residuals> {
    let ex = data.exceedances(fits.p_t)?;
    let z1 = ex.x0.iter().zip(&ex.y1).map(|(&x, &y)| fits.coordinate1.residual(x, y)).collect();
    let z2 = ex.x0.iter().zip(&ex.y2).map(|(&x, &y)| fits.coordinate2.residual(x, y)).collect();
    Ok(Residuals { x0: ex.x0, z1, z2 })
}

pub fn residual_diagnostic(data: &Dataset, fits: &FittedNorming, levels: &[f64], b: usize, seed: u64) -> Result<TestResult> {
    if !fits.converged() {
        return Err(Error::FitConvergence("residual diagnostic needs converged fits".into()));
    }
    let r = residuals(data, fits)?;
    permutation_test_pairs(&r.z1, &r.z2, levels, b, seed)
}

pub fn write_residuals_csv(path: &Path, r: &Residuals) -> Result<()> {
    let file = File::create(path)?;
    crate::simulate::io::write_columns_csv(file, &["x0", "z1", "z2"], &[&r.x0, &r.z1, &r.z2])
}
