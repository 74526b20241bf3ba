//! Empirical `χ(p) = P[F1(X1) > p, F2(X2) > p | F0(X0) > p]`.

use crate::error::{Error, Result};

/// Conditioning exceedances required before a ratio is reported.
pub const MIN_CONDITIONING: usize = 50;

/// With empirical margins `F̂(x) = #{v <= x}/n`: `F̂(x) > p` iff `x` is at
/// least the `(⌊pn⌋ + 1)`-th order statistic, ties included.
fn empirical_threshold(values: &[f64], p: f64) -> Option<f64> {
    let n = values.len();
    let k = (p * n as f64).floor() as usize + 1;
    if k > n {
        return None;
    }
    let mut scratch = values.to_vec();
    let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
    Some(*kth)
}

fn check_inputs(cols: [&[f64]; 3], p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
    }
    let n = cols[0].len();
    if cols.iter().any(|c| c.len() != n) {
        return Err(Error::domain("columns must have equal length"));
    }
    if cols.iter().any(|c| c.iter().any(|v| v.is_nan())) {
        return Err(Error::domain("χ input contains NaN"));
    }
    Ok(())
}

fn ratio(joint: usize, conditioning: usize) -> Result<f64> {
    if conditioning < MIN_CONDITIONING {
        return Err(Error::InsufficientData {
            what: "χ conditioning exceedances".into(),
            needed: MIN_CONDITIONING,
            found: conditioning,
        });
    }
    Ok(joint as f64 / conditioning as f64)
}

/// χ̂ with rank-based (empirical) margins for all three coordinates.
pub fn chi_hat(x0: &[f64], x1: &[f64], x2: &[f64], p: f64) -> Result<f64> {
    check_inputs([x0, x1, x2], p)?;
    let thr = |c: &[f64]| empirical_threshold(c, p);
    let (Some(t0), Some(t1), Some(t2)) = (thr(x0), thr(x1), thr(x2)) else {
        return ratio(0, 0);
    };
    let mut cond = 0;
    let mut joint = 0;
    for ((&a, &b), &c) in x0.iter().zip(x1).zip(x2) {
        if a >= t0 {
            cond += 1;
            if b >= t1 && c >= t2 {
                joint += 1;
            }
        }
    }
    ratio(joint, cond)
}

/// χ̂ for data already on the probability scale, `u_i = F_i(x_i)` with known
/// margins.
pub fn chi_hat_uniform(u0: &[f64], u1: &[f64], u2: &[f64], p: f64) -> Result<f64> {
    check_inputs([u0, u1, u2], p)?;
    let mut cond = 0;
    let mut joint = 0;
    for ((&a, &b), &c) in u0.iter().zip(u1).zip(u2) {
        if a > p {
            cond += 1;
            if b > p && c > p {
                joint += 1;
            }
        }
    }
    ratio(joint, cond)
}
