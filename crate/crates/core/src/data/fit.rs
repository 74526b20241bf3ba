//! Pseudo-likelihood fit of one coordinate's norming functions.
//!
//! The working model is `y = β(x0) + α(x0) z` with `z` from a location family
//! of unit scale. Only the product of `a` and a noise scale is identifiable
//! from `α(x0) z`, so the noise scale is held at 1 and `a` carries it. The free
//! parameters are `(ρ, κ, ln a, loc)`; for gaussian and uniform noise the last
//! two are profiled out in closed form.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::simplex::{minimize, SimplexOptions};
use super::Dataset;
use crate::error::{Error, Result};
use crate::models::{Coordinate, NoiseFamily, NoiseLaw};
use crate::norming::{ErvParams, RHO_CUTOFF};

pub const MIN_EXCEEDANCES: usize = 30;

const RHO_MIN: f64 = -5.0;
const RHO_MAX: f64 = 1.0;
const A_MIN: f64 = 1e-6;
const A_MAX: f64 = 1e6;

/// Start design: `ρ` levels crossed once with multipliers of the moment
/// estimate of `κ`.
const START_RHO: [f64; 8] = [-0.875, -0.625, -0.375, -0.125, 0.125, 0.375, 0.625, 0.875];
const START_KAPPA_MULT: [f64; 8] = [1.0, 1.75, 0.25, 1.25, 0.5, 2.0, 0.75, 1.5];

/// Starts are screened on a thinned copy of at most this many points.
const SCREEN_POINTS: usize = 5000;
const SCREEN_EVALS: usize = 400;
const POLISH_ROUNDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinateFit {
    pub erv: ErvParams,
    pub noise: NoiseLaw,
    /// Negative log pseudo-likelihood at the optimum.
    pub objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Index of the start whose screened optimum was polished.
    pub start: usize,
}

impl CoordinateFit {
    /// `(y - β̂(x0)) / α̂(x0) - loc`.
    pub fn residual(&self, x0: f64, y: f64) -> f64 {
        let lx = x0.ln();
        (y - self.erv.beta_at(lx)) / self.erv.alpha_at(lx) - self.noise.location
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedNorming {
    pub coordinate1: CoordinateFit,
    pub coordinate2: CoordinateFit,
    /// Threshold level on the uniform scale.
    pub p_t: f64,
    /// Threshold on the Pareto conditioning scale, `1/(1 - p_t)`.
    pub threshold: f64,
    pub exceedances: usize,
}

impl FittedNorming {
    pub fn coordinate(&self, i: Coordinate) -> &CoordinateFit {
        match i {
            Coordinate::One => &self.coordinate1,
            Coordinate::Two => &self.coordinate2,
        }
    }

    pub fn converged(&self) -> bool {
        self.coordinate1.converged && self.coordinate2.converged
    }
}

/// Negative log pseudo-likelihood of `(erv, noise)` on exceedance pairs.
pub fn objective(y: &[f64], x0: &[f64], erv: &ErvParams, noise: &NoiseLaw) -> f64 {
    let ln_scale = (erv.a * noise.scale).ln();
    y.iter()
        .zip(x0)
        .map(|(&y, &x)| {
            let lx = x.ln();
            let z = ((y - erv.beta_at(lx)) / erv.alpha_at(lx) - noise.location) / noise.scale;
            ln_scale + erv.rho * lx + noise.family.std_neg_log_density(z)
        })
        .sum()
}

struct Problem {
    lx: Vec<f64>,
    y: Vec<f64>,
    sum_lx: f64,
    family: NoiseFamily,
}

impl Problem {
    fn new(lx: Vec<f64>, y: Vec<f64>, family: NoiseFamily) -> Self {
        let sum_lx = lx.iter().sum();
        Self { lx, y, sum_lx, family }
    }

    fn thinned(&self, max_points: usize) -> Self {
        let stride = self.lx.len().div_ceil(max_points).max(1);
        let lx = self.lx.iter().step_by(stride).copied().collect();
        let y = self.y.iter().step_by(stride).copied().collect();
        Self::new(lx, y, self.family)
    }

    /// Gaussian and uniform noise have closed-form optima in `(a, loc)` for
    /// fixed `(ρ, κ)`; those are searched over `(ρ, κ)` only.
    fn profiled(&self) -> bool {
        matches!(self.family, NoiseFamily::Gaussian | NoiseFamily::Uniform)
    }

    fn nll(&self, th: &[f64]) -> f64 {
        if self.profiled() {
            const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
            let Some((ln_a, _)) = self.profile(th[0], th[1]) else {
                return f64::INFINITY;
            };
            let n = self.lx.len() as f64;
            // at the profiled optimum Σ z²/2 = n/2 (gaussian) and Σ -ln f(z) = 0 (uniform)
            let rest = if self.family == NoiseFamily::Gaussian { n * (0.5 + HALF_LN_2PI) } else { 0.0 };
            return n * ln_a + th[0] * self.sum_lx + rest;
        }
        self.full_nll(th)
    }

    /// Optimal `(ln a, loc)` given `(ρ, κ)`, from the standardised remainders
    /// `r = (y - κ bc_ρ(x)) / x^ρ`.
    fn profile(&self, rho: f64, kappa: f64) -> Option<(f64, f64)> {
        if !(RHO_MIN..=RHO_MAX).contains(&rho) || !kappa.is_finite() {
            return None;
        }
        let log_branch = rho.abs() < RHO_CUTOFF;
        let remainder = |lx: f64, y: f64| {
            let m1 = (rho * lx).exp_m1();
            let bc = if log_branch { lx } else { m1 / rho };
            (y - kappa * bc) / (1.0 + m1)
        };
        let n = self.lx.len() as f64;
        let (a, loc) = if self.family == NoiseFamily::Uniform {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (&lx, &y) in self.lx.iter().zip(&self.y) {
                let r = remainder(lx, y);
                lo = lo.min(r);
                hi = hi.max(r);
            }
            let a = hi - lo;
            (a, lo / a)
        } else {
            // shifted sums keep the variance free of cancellation
            let shift = remainder(self.lx[0], self.y[0]);
            let (mut s1, mut s2) = (0.0, 0.0);
            for (&lx, &y) in self.lx.iter().zip(&self.y) {
                let d = remainder(lx, y) - shift;
                s1 += d;
                s2 += d * d;
            }
            let mean = s1 / n;
            let a = ((s2 / n) - mean * mean).max(0.0).sqrt();
            (a, (shift + mean) / a)
        };
        (a > A_MIN && a < A_MAX && loc.is_finite()).then(|| (a.ln(), loc))
    }

    fn full_nll(&self, th: &[f64]) -> f64 {
        let (rho, kappa, ln_a, loc) = (th[0], th[1], th[2], th[3]);
        if !(RHO_MIN..=RHO_MAX).contains(&rho) || !(ln_a > A_MIN.ln() && ln_a < A_MAX.ln()) || !kappa.is_finite() {
            return f64::INFINITY;
        }
        let a = ln_a.exp();
        let log_branch = rho.abs() < RHO_CUTOFF;
        let mut s = 0.0;
        for (&lx, &y) in self.lx.iter().zip(&self.y) {
            let m1 = (rho * lx).exp_m1();
            let bc = if log_branch { lx } else { m1 / rho };
            let z = (y - kappa * bc) / (a * (1.0 + m1)) - loc;
            s += self.family.std_neg_log_density(z);
        }
        self.lx.len() as f64 * ln_a + rho * self.sum_lx + s
    }

    /// Expands a search point to `(ρ, κ, ln a, loc)`.
    fn complete(&self, th: &[f64]) -> Option<[f64; 4]> {
        if self.profiled() {
            self.profile(th[0], th[1]).map(|(ln_a, loc)| [th[0], th[1], ln_a, loc])
        } else {
            Some([th[0], th[1], th[2], th[3]])
        }
    }

    /// Moment start for a given `ρ`: weighted least squares of `y` on
    /// `(1, bc_ρ(x))` gives `κ`, then `a` and `loc` match the mean and spread of
    /// the standardised remainder.
    fn start(&self, rho: f64, kappa_mult: f64) -> [f64; 4] {
        let bc = |lx: f64| if rho.abs() < RHO_CUTOFF { lx } else { (rho * lx).exp_m1() / rho };
        let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&lx, &y) in self.lx.iter().zip(&self.y) {
            let w = (-2.0 * rho * lx).exp();
            let b = bc(lx);
            sw += w;
            sx += w * b;
            sy += w * y;
            sxx += w * b * b;
            sxy += w * b * y;
        }
        let det = sw * sxx - sx * sx;
        let (c0, slope) = if det > 1e-12 * sw * sxx {
            ((sxx * sy - sx * sxy) / det, (sw * sxy - sx * sy) / det)
        } else {
            (sy / sw, 0.0)
        };
        // E y = a(loc + μ) + (κ + ρ a(loc + μ)) bc, so κ = slope - ρ c0
        let kappa = (slope - rho * c0) * kappa_mult;

        let r: Vec<f64> = self
            .lx
            .iter()
            .zip(&self.y)
            .map(|(&lx, &y)| (y - kappa * bc(lx)) * (-rho * lx).exp())
            .collect();
        let n = r.len() as f64;
        let (mu, sigma) = self.family.std_moments();
        let (a, loc) = if self.family == NoiseFamily::Uniform {
            let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let a = ((hi - lo) * (1.0 + 1e-6)).max(A_MIN * 10.0);
            (a, lo / a - 5e-7)
        } else {
            let mean = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            let a = (var.sqrt() / sigma).clamp(A_MIN * 10.0, A_MAX / 10.0);
            (a, mean / a - mu)
        };
        [rho, kappa, a.ln(), loc]
    }
}

fn steps(th: &[f64], scale: f64) -> [f64; 4] {
    let a = th[2].exp();
    let rho_step = if th[0] + 0.1 * scale > RHO_MAX { -0.1 * scale } else { 0.1 * scale };
    [rho_step, 0.1 * scale * (th[1].abs() + a), 0.1 * scale, 0.1 * scale]
}

/// Fits `y = β(x0) + α(x0) z` on exceedance pairs, `x0` on the Pareto scale.
pub fn fit_norming(y: &[f64], x0: &[f64], family: NoiseFamily) -> Result<CoordinateFit> {
    if y.len() != x0.len() {
        return Err(Error::domain(format!("length mismatch: {} responses, {} conditioning values", y.len(), x0.len())));
    }
    if y.len() < MIN_EXCEEDANCES {
        return Err(Error::InsufficientData { what: "norming fit".into(), needed: MIN_EXCEEDANCES, found: y.len() });
    }
    if x0.iter().any(|&x| !(x > 0.0 && x.is_finite())) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("fit inputs must be finite with positive conditioning values"));
    }
    let full = Problem::new(x0.iter().map(|x| x.ln()).collect(), y.to_vec(), family);
    let screen = full.thinned(SCREEN_POINTS);

    let dim = if full.profiled() { 2 } else { 4 };

    let screen_opts = SimplexOptions { f_tol: 1e-8, x_tol: 1e-4, max_evals: SCREEN_EVALS };
    let screened: Vec<(f64, [f64; 4], usize)> = (0..START_RHO.len())
        .into_par_iter()
        .map(|k| {
            let th0 = full.start(START_RHO[k], START_KAPPA_MULT[k]);
            let r = minimize(|th| screen.nll(th), &th0[..dim], &steps(&th0, 1.0)[..dim], &screen_opts);
            match full.complete(&r.x) {
                Some(cand) if full.nll(&cand).is_finite() => (full.nll(&cand), cand, r.evaluations),
                _ => (full.nll(&th0), th0, r.evaluations),
            }
        })
        .collect();
    let mut evaluations: usize = screened.iter().map(|s| s.2).sum();
    let (start, &(mut best_f, mut best, _)) = screened
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.0.total_cmp(&b.0).then(i.cmp(j)))
        .expect("at least one start");
    if !best_f.is_finite() {
        return Err(Error::FitConvergence("no start has a finite objective".into()));
    }

    let polish_opts = SimplexOptions::default();
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..POLISH_ROUNDS {
        let r = minimize(|th| full.nll(th), &best[..dim], &steps(&best, 0.5)[..dim], &polish_opts);
        iterations += r.iterations;
        evaluations += r.evaluations;
        let improvement = best_f - r.f;
        if r.f <= best_f {
            if let Some(cand) = full.complete(&r.x) {
                best_f = r.f;
                best = cand;
            }
        }
        if r.converged && improvement <= polish_opts.f_tol * 100.0 * (1.0 + best_f.abs()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FitConvergence(format!(
            "simplex did not settle after {POLISH_ROUNDS} restarts: objective {best_f}, rho {}, kappa {}, a {}, \
             location {}, {evaluations} evaluations",
            best[0],
            best[1],
            best[2].exp(),
            best[3]
        )));
    }
    Ok(CoordinateFit {
        erv: ErvParams { a: best[2].exp(), rho: best[0], kappa: best[1] },
        noise: NoiseLaw { family, location: best[3], scale: 1.0 },
        objective: best_f,
        iterations,
        evaluations,
        converged,
        start,
    })
}

/// Rank-transforms the conditioning column, keeps rows above the `p_t`
/// threshold and fits both coordinates.
pub fn fit_dataset(data: &Dataset, p_t: f64, family: NoiseFamily) -> Result<FittedNorming> {
    if data.len() < super::MIN_FIT_ROWS {
        return Err(Error::InsufficientData { what: "dataset fit".into(), needed: super::MIN_FIT_ROWS, found: data.len() });
    }
    let ex = data.exceedances(p_t)?;
    let (c1, c2) = rayon::join(|| fit_norming(&ex.y1, &ex.x0, family), || fit_norming(&ex.y2, &ex.x0, family));
    Ok(FittedNorming { coordinate1: c1?, coordinate2: c2?, p_t, threshold: ex.threshold, exceedances: ex.len() })
}
