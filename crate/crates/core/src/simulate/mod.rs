//! Conditioned Monte Carlo: exceedances of `X0` over `t` and their normings.
//!
//! Row `k` of a sample is drawn from its own counter stream keyed by
//! `(seed, k)`, consuming exactly three sub-uniforms (`X0`, `Z1`, `Z2`), so
//! the output is bit-identical for any chunking across workers.

pub(crate) mod io;

pub use io::{
    read_exceedance_binary, read_exceedance_csv, read_normed_binary, read_normed_csv, write_exceedance_binary,
    write_exceedance_csv, write_normed_binary, write_normed_csv, BINARY_MAGIC, BINARY_VERSION,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{check_threshold, pareto_exceedance_from_uniform, CiModel, Coordinate};
use crate::rng::CounterRng;

/// RNG domain tag for exceedance rows.
pub(crate) const DOMAIN_SAMPLE: u64 = 0x5341_4d50_4c45;

/// Default row budget: three `f64` columns of 50M rows is 1.2 GB.
pub const DEFAULT_MAX_ROWS: usize = 50_000_000;

const CHUNK_ROWS: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DrawOptions {
    pub max_rows: usize,
}

impl Default for DrawOptions {
    fn default() -> Self {
        Self { max_rows: DEFAULT_MAX_ROWS }
    }
}

/// Draws `(x0, x1, x2)` given `X0 > t`, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceSample {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub t: f64,
    pub seed: u64,
    pub model_id: String,
}

impl ExceedanceSample {
    pub fn len(&self) -> usize {
        self.x0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormingMode {
    /// Normalise by the realised `x0`.
    Random,
    /// Normalise by the level `t` only.
    Deterministic,
}

impl NormingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NormingMode::Random => "random",
            NormingMode::Deterministic => "deterministic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormedSample {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub mode: NormingMode,
    pub t: f64,
    pub seed: u64,
    pub model_id: String,
}

impl NormedSample {
    /// Wraps two columns that did not come from a simulated sample.
    pub fn from_columns(w1: Vec<f64>, w2: Vec<f64>, mode: NormingMode) -> Result<Self> {
        if w1.len() != w2.len() {
            return Err(Error::domain(format!("column lengths differ: {} vs {}", w1.len(), w2.len())));
        }
        Ok(Self { w1, w2, mode, t: f64::NAN, seed: 0, model_id: String::new() })
    }

    pub fn len(&self) -> usize {
        self.w1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w1.is_empty()
    }
}

/// One row from pinned sub-uniforms.
pub fn exceedance_row(model: &CiModel, t: f64, u0: f64, u1: f64, u2: f64) -> (f64, f64, f64) {
    let x0 = pareto_exceedance_from_uniform(t, u0);
    let (x1, x2) = model.conditional_from_uniforms(x0, u1, u2);
    (x0, x1, x2)
}

pub fn draw_exceedances(model: &CiModel, t: f64, n: usize, seed: u64) -> Result<ExceedanceSample> {
    draw_exceedances_with(model, t, n, seed, &DrawOptions::default())
}

/// Parallelises over row chunks on the current rayon pool.
pub fn draw_exceedances_with(
    model: &CiModel,
    t: f64,
    n: usize,
    seed: u64,
    opts: &DrawOptions,
) -> Result<ExceedanceSample> {
    check_threshold(t)?;
    model.validate()?;
    if n == 0 {
        return Err(Error::domain("sample size n must be >= 1"));
    }
    if n > opts.max_rows {
        return Err(Error::Capacity { requested: n, limit: opts.max_rows });
    }
    let mut x0 = vec![0.0; n];
    let mut x1 = vec![0.0; n];
    let mut x2 = vec![0.0; n];
    x0.par_chunks_mut(CHUNK_ROWS)
        .zip(x1.par_chunks_mut(CHUNK_ROWS))
        .zip(x2.par_chunks_mut(CHUNK_ROWS))
        .enumerate()
        .for_each(|(chunk, ((c0, c1), c2))| {
            let start = chunk * CHUNK_ROWS;
            for (k, ((r0, r1), r2)) in c0.iter_mut().zip(c1.iter_mut()).zip(c2.iter_mut()).enumerate() {
                let mut rng = CounterRng::with_domain(seed, DOMAIN_SAMPLE, (start + k) as u64);
                let u0 = rng.uniform();
                let u1 = rng.uniform();
                let u2 = rng.uniform();
                (*r0, *r1, *r2) = exceedance_row(model, t, u0, u1, u2);
            }
        });
    Ok(ExceedanceSample { x0, x1, x2, t, seed, model_id: model.model_id() })
}

fn check_model(sample: &ExceedanceSample, model: &CiModel) -> Result<()> {
    let id = model.model_id();
    if id != sample.model_id {
        return Err(Error::ModelMismatch { expected: sample.model_id.clone(), found: id });
    }
    Ok(())
}

/// `w_i = (x_i - β_i(x0)) / α_i(x0)`.
pub fn apply_random_norming(sample: &ExceedanceSample, model: &CiModel) -> Result<NormedSample> {
    check_model(sample, model)?;
    let norm = |i: Coordinate, xs: &[f64]| -> Vec<f64> {
        let erv = model.erv(i);
        sample
            .x0
            .iter()
            .zip(xs)
            .map(|(&x0, &x)| {
                let l = x0.ln();
                (x - erv.beta_at(l)) / erv.alpha_at(l)
            })
            .collect()
    };
    Ok(NormedSample {
        w1: norm(Coordinate::One, &sample.x1),
        w2: norm(Coordinate::Two, &sample.x2),
        mode: NormingMode::Random,
        t: sample.t,
        seed: sample.seed,
        model_id: sample.model_id.clone(),
    })
}

/// `w_i = (x_i - β_i(t)) / α_i(t)`.
pub fn apply_deterministic_norming(sample: &ExceedanceSample, model: &CiModel) -> Result<NormedSample> {
    check_model(sample, model)?;
    let l = sample.t.ln();
    let norm = |i: Coordinate, xs: &[f64]| -> Vec<f64> {
        let erv = model.erv(i);
        let (b, a) = (erv.beta_at(l), erv.alpha_at(l));
        xs.iter().map(|&x| (x - b) / a).collect()
    };
    Ok(NormedSample {
        w1: norm(Coordinate::One, &sample.x1),
        w2: norm(Coordinate::Two, &sample.x2),
        mode: NormingMode::Deterministic,
        t: sample.t,
        seed: sample.seed,
        model_id: sample.model_id.clone(),
    })
}

pub fn apply_norming(sample: &ExceedanceSample, model: &CiModel, mode: NormingMode) -> Result<NormedSample> {
    match mode {
        NormingMode::Random => apply_random_norming(sample, model),
        NormingMode::Deterministic => apply_deterministic_norming(sample, model),
    }
}
