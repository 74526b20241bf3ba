//! Conditioned extreme value limit laws under random and deterministic norming.
//!
//! Given a trivariate vector `(X0, X1, X2)` with `X0` unit Pareto and `X1`, `X2`
//! conditionally independent given `X0`, this crate simulates exceedances of
//! `X0` over a level `t`, normalises the other two coordinates either by the
//! realised value of `X0` (random norming) or by the level `t` (deterministic
//! norming), and checks the resulting joint laws against their theoretical
//! limits:
//!
//! - random norming: the product law `G1(x1) G2(x2)`,
//! - deterministic norming: the Pareto mixture
//!   `H(x1, x2) = ∫_1^∞ G1((x1 - ψ1(v)) / v^ρ1) G2((x2 - ψ2(v)) / v^ρ2) v^-2 dv`,
//!   which only factorises when one coordinate has `(κ, ρ) = (0, 0)`.
//!
//! The same statistics are exposed as a tail diagnostic for real data in
//! [`data`], and every experiment is driven from the `cevnorm` binary
//! through [`cli`].

pub mod cli;
pub mod data;
pub mod error;
pub mod limits;
pub mod models;
pub mod norming;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use limits::{GridSpec, QuadOptions};
pub use models::{CiModel, NoiseFamily, NoiseLaw};
pub use norming::ErvParams;
pub use rng::CounterRng;
pub use simulate::{ExceedanceSample, NormedSample, NormingMode};
pub use stats::{Ecdf, TestResult};
