//! Conditionally independent generative models.
//!
//! `X0` is unit Pareto. Given `X0 = x`, each coordinate is
//! `X_i = β_i(x) + α_i(x) (Z_i + ε/x)` with `Z_1`, `Z_2` independent draws from
//! the noise laws. With `ε = 0` the kernel limits hold exactly at finite levels;
//! `ε > 0` adds a vanishing location perturbation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::norming::ErvParams;
use crate::rng::CounterRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Gaussian,
    Gumbel,
    Logistic,
    Uniform,
}

impl NoiseFamily {
    pub const ALL: [NoiseFamily; 4] = [Self::Gaussian, Self::Gumbel, Self::Logistic, Self::Uniform];

    /// CDF of the standard member (location 0, scale 1).
    #[inline]
    pub fn std_cdf(self, z: f64) -> f64 {
        match self {
            Self::Gaussian => std_normal_cdf(z),
            Self::Gumbel => (-(-z).exp()).exp(),
            Self::Logistic => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            Self::Uniform => z.clamp(0.0, 1.0),
        }
    }

    /// Quantile of the standard member; `p` must lie in (0, 1).
    #[inline]
    pub fn std_quantile(self, p: f64) -> f64 {
        match self {
            Self::Gaussian => std_normal_quantile(p),
            Self::Gumbel => -(-p.ln()).ln(),
            Self::Logistic => (p / (1.0 - p)).ln(),
            Self::Uniform => p,
        }
    }

    /// `-ln f(z)` of the standard member, `+∞` off the support.
    #[inline]
    pub fn std_neg_log_density(self, z: f64) -> f64 {
        const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
        match self {
            Self::Gaussian => 0.5 * z * z + HALF_LN_2PI,
            Self::Gumbel => z + (-z).exp(),
            Self::Logistic => {
                let a = z.abs();
                a + 2.0 * (-a).exp().ln_1p()
            }
            Self::Uniform => {
                if (0.0..=1.0).contains(&z) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Mean and standard deviation of the standard member.
    pub fn std_moments(self) -> (f64, f64) {
        const EULER: f64 = 0.577_215_664_901_532_9;
        let pi = std::f64::consts::PI;
        match self {
            Self::Gaussian => (0.0, 1.0),
            Self::Gumbel => (EULER, pi / 6f64.sqrt()),
            Self::Logistic => (0.0, pi / 3f64.sqrt()),
            Self::Uniform => (0.5, (1.0f64 / 12.0).sqrt()),
        }
    }
}

#[inline]
fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Acklam's rational approximation (relative error ~1e-9) polished by one
/// Halley step against the full-precision CDF.
fn std_normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;
    let tail = |q: f64| {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    };
    let x = if p < P_LOW {
        tail(p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - p)
    };
    // Φ(x) - p, formed on whichever tail is small
    let e = if x <= 0.0 { std_normal_cdf(x) - p } else { (1.0 - p) - std_normal_cdf(-x) };
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLaw {
    pub family: NoiseFamily,
    pub location: f64,
    pub scale: f64,
}

impl NoiseLaw {
    pub fn new(family: NoiseFamily, location: f64, scale: f64) -> Result<Self> {
        let law = Self { family, location, scale };
        law.validate()?;
        Ok(law)
    }

    pub fn standard(family: NoiseFamily) -> Self {
        Self { family, location: 0.0, scale: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.location.is_finite() {
            return Err(Error::domain(format!("noise location must be finite, got {}", self.location)));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::domain(format!("noise scale must be finite and > 0, got {}", self.scale)));
        }
        Ok(())
    }

    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        self.family.std_cdf((x - self.location) / self.scale)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0, 1), got {p}")));
        }
        Ok(self.quantile_unchecked(p))
    }

    #[inline]
    pub(crate) fn quantile_unchecked(&self, p: f64) -> f64 {
        self.location + self.scale * self.family.std_quantile(p)
    }

    pub fn median(&self) -> f64 {
        self.quantile_unchecked(0.5)
    }
}

pub fn noise_cdf(law: &NoiseLaw, x: f64) -> f64 {
    law.cdf(x)
}

pub fn noise_quantile(law: &NoiseLaw, p: f64) -> Result<f64> {
    law.quantile(p)
}

/// One of the two conditioned coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coordinate {
    One,
    Two,
}

impl Coordinate {
    pub const BOTH: [Coordinate; 2] = [Coordinate::One, Coordinate::Two];

    pub fn index(self) -> usize {
        match self {
            Coordinate::One => 0,
            Coordinate::Two => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CiModel {
    pub erv1: ErvParams,
    pub erv2: ErvParams,
    pub noise1: NoiseLaw,
    pub noise2: NoiseLaw,
    #[serde(default)]
    pub perturbation: f64,
    /// Negative control: `Z2` is the comonotone image of `Z1`
    /// (`Z2 = G2⁻¹(G1(Z1))`), which breaks conditional independence.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub comonotone_control: bool,
}

impl CiModel {
    pub fn new(erv1: ErvParams, erv2: ErvParams, noise1: NoiseLaw, noise2: NoiseLaw) -> Result<Self> {
        let m = Self { erv1, erv2, noise1, noise2, perturbation: 0.0, comonotone_control: false };
        m.validate()?;
        Ok(m)
    }

    /// Same `(a, ρ, κ)` and noise law on both coordinates.
    pub fn symmetric(erv: ErvParams, noise: NoiseLaw) -> Result<Self> {
        Self::new(erv, erv, noise, noise)
    }

    pub fn with_perturbation(mut self, eps: f64) -> Result<Self> {
        self.perturbation = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_comonotone_control(mut self, on: bool) -> Self {
        self.comonotone_control = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.erv1.validate()?;
        self.erv2.validate()?;
        self.noise1.validate()?;
        self.noise2.validate()?;
        if !(self.perturbation.is_finite() && self.perturbation >= 0.0) {
            return Err(Error::domain(format!("perturbation must be finite and >= 0, got {}", self.perturbation)));
        }
        Ok(())
    }

    pub fn erv(&self, i: Coordinate) -> &ErvParams {
        match i {
            Coordinate::One => &self.erv1,
            Coordinate::Two => &self.erv2,
        }
    }

    pub fn noise(&self, i: Coordinate) -> &NoiseLaw {
        match i {
            Coordinate::One => &self.noise1,
            Coordinate::Two => &self.noise2,
        }
    }

    /// Content hash: SHA-256 over the canonical JSON form.
    pub fn model_id(&self) -> String {
        let json = serde_json::to_vec(self).expect("model serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `X_i` given `X0 = x0` and latent noise `z`.
    #[inline]
    pub fn coordinate_value(&self, i: Coordinate, x0: f64, z: f64) -> f64 {
        let erv = self.erv(i);
        let log_x0 = x0.ln();
        erv.beta_at(log_x0) + erv.alpha_at(log_x0) * (z + self.perturbation / x0)
    }

    /// Both coordinates from two sub-uniforms.
    #[inline]
    pub fn conditional_from_uniforms(&self, x0: f64, u1: f64, u2: f64) -> (f64, f64) {
        let z1 = self.noise1.quantile_unchecked(u1);
        let u2 = if self.comonotone_control { u1 } else { u2 };
        let z2 = self.noise2.quantile_unchecked(u2);
        (self.coordinate_value(Coordinate::One, x0, z1), self.coordinate_value(Coordinate::Two, x0, z2))
    }

    /// `π_i(x0, (-∞, y])`.
    pub fn kernel_cdf(&self, i: Coordinate, x0: f64, y: f64) -> Result<f64> {
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::domain(format!("x0 must be positive, got {x0}")));
        }
        let erv = self.erv(i);
        let log_x0 = x0.ln();
        let z = (y - erv.beta_at(log_x0)) / erv.alpha_at(log_x0) - self.perturbation / x0;
        Ok(self.noise(i).cdf(z))
    }

    /// `G_{v;i}(x) = G_i((x - ψ_i(v)) / v^ρ_i)`.
    pub fn theoretical_gv(&self, i: Coordinate, v: f64, x: f64) -> Result<f64> {
        if !(v >= 1.0 && v.is_finite()) {
            return Err(Error::domain(format!("v must be >= 1, got {v}")));
        }
        Ok(self.noise(i).cdf(self.erv(i).limit_shift_at(x, v.ln())))
    }
}

/// `x0 = t/U`: an exceedance of a unit Pareto variable over `t`.
pub fn pareto_exceedance_from_uniform(t: f64, u: f64) -> f64 {
    t / u
}

pub fn sample_pareto_exceedance(t: f64, rng: &mut CounterRng) -> Result<f64> {
    check_threshold(t)?;
    Ok(pareto_exceedance_from_uniform(t, rng.uniform()))
}

pub fn sample_conditional(model: &CiModel, x0: f64, rng: &mut CounterRng) -> Result<(f64, f64)> {
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(Error::domain(format!("x0 must be positive, got {x0}")));
    }
    let u1 = rng.uniform();
    let u2 = rng.uniform();
    Ok(model.conditional_from_uniforms(x0, u1, u2))
}

pub(crate) fn check_threshold(t: f64) -> Result<()> {
    if t >= 1.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("threshold t must be >= 1, got {t}")))
    }
}

pub fn kernel_cdf(model: &CiModel, i: Coordinate, x0: f64, y: f64) -> Result<f64> {
    model.kernel_cdf(i, x0, y)
}

pub fn theoretical_gv(model: &CiModel, i: Coordinate, v: f64, x: f64) -> Result<f64> {
    model.theoretical_gv(i, v, x)
}
