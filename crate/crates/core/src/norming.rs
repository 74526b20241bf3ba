//! Extended-regularly-varying norming pairs.
//!
//! Each coordinate is normalised by `α(t) = a t^ρ` and
//! `β(t) = κ (t^ρ - 1) / ρ` (`κ ln t` at `ρ = 0`). This is the canonical member
//! of the ERV class: `α(tx)/α(t) = x^ρ` and `(β(tx) - β(t))/α(t) = ψ(x)` hold
//! exactly at every finite `t`, with `ψ` evaluated at the effective coefficient
//! `κ/a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `|ρ|` the `ρ = 0` (logarithmic) branch is used.
pub const RHO_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErvParams {
    pub a: f64,
    pub rho: f64,
    pub kappa: f64,
}

impl Default for ErvParams {
    fn default() -> Self {
        Self { a: 1.0, rho: 0.0, kappa: 0.0 }
    }
}

impl ErvParams {
    pub fn new(a: f64, rho: f64, kappa: f64) -> Result<Self> {
        let p = Self { a, rho, kappa };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::domain(format!("scale coefficient a must be finite and > 0, got {}", self.a)));
        }
        if !self.rho.is_finite() {
            return Err(Error::domain(format!("rho must be finite, got {}", self.rho)));
        }
        if !self.kappa.is_finite() {
            return Err(Error::domain(format!("kappa must be finite, got {}", self.kappa)));
        }
        Ok(())
    }

    /// `κ/a`, the coefficient that appears in the limit shift.
    pub fn kappa_eff(&self) -> f64 {
        self.kappa / self.a
    }

    /// `(κ, ρ) = (0, 0)`: both norming functions are constant in `t`.
    pub fn is_constant(&self) -> bool {
        self.kappa == 0.0 && self.rho == 0.0
    }

    pub fn alpha(&self, t: f64) -> Result<f64> {
        check_positive("t", t)?;
        Ok(self.alpha_at(t.ln()))
    }

    pub fn beta(&self, t: f64) -> Result<f64> {
        check_positive("t", t)?;
        Ok(self.beta_at(t.ln()))
    }

    /// `α` at `t = exp(log_t)`.
    #[inline]
    pub(crate) fn alpha_at(&self, log_t: f64) -> f64 {
        self.a * (self.rho * log_t).exp()
    }

    /// `β` at `t = exp(log_t)`.
    #[inline]
    pub(crate) fn beta_at(&self, log_t: f64) -> f64 {
        self.kappa * box_cox_log(self.rho, log_t)
    }

    /// `(x - ψ(v)) / v^ρ` with `ψ` at `κ/a`.
    pub fn limit_shift(&self, x: f64, v: f64) -> Result<f64> {
        check_positive("v", v)?;
        Ok(self.limit_shift_at(x, v.ln()))
    }

    /// Written as `x v^-ρ - κ (1 - v^-ρ)/ρ` so that `v → ∞` never forms ∞/∞.
    #[inline]
    pub(crate) fn limit_shift_at(&self, x: f64, log_v: f64) -> f64 {
        let inv_pow = (-self.rho * log_v).exp();
        let x_part = if x.is_infinite() { x } else { x * inv_pow };
        x_part - self.kappa_eff() * box_cox_log(-self.rho, log_v)
    }
}

/// `(e^{ρL} - 1)/ρ`, continuous through `ρ = 0` where it equals `L`.
#[inline]
pub(crate) fn box_cox_log(rho: f64, log_v: f64) -> f64 {
    if rho.abs() < RHO_CUTOFF {
        log_v
    } else {
        (rho * log_v).exp_m1() / rho
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {value}")))
    }
}

/// `ψ(v) = κ (v^ρ - 1)/ρ`, or `κ ln v` when `ρ = 0`.
pub fn psi(v: f64, rho: f64, kappa_eff: f64) -> Result<f64> {
    check_positive("v", v)?;
    Ok(kappa_eff * box_cox_log(rho, v.ln()))
}

pub fn alpha(params: &ErvParams, t: f64) -> Result<f64> {
    params.alpha(t)
}

pub fn beta(params: &ErvParams, t: f64) -> Result<f64> {
    params.beta(t)
}

pub fn limit_shift(x: f64, v: f64, params: &ErvParams) -> Result<f64> {
    params.limit_shift(x, v)
}
