//! Limit laws of the normed pairs.
//!
//! Random norming converges to the product `G1 ⊗ G2`. Deterministic norming
//! converges to the Pareto mixture `H`, evaluated here after substituting
//! `u = 1/v`, which maps `(1, ∞)` onto `(0, 1)` and absorbs the `v⁻²` weight:
//!
//! ```text
//! H(x1, x2) = ∫_0^1 G1(s1(x1, 1/u)) G2(s2(x2, 1/u)) du,   s_i(x, v) = (x - ψ_i(v)) / v^ρ_i
//! ```

mod quadrature;

pub use quadrature::{integrate_unit, QuadResult};

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{CiModel, Coordinate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub max_depth: usize,
    pub base_nodes: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-9, max_depth: 40, base_nodes: 64 }
    }
}

impl QuadOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::domain(format!("abs_tol must be > 0, got {}", self.abs_tol)));
        }
        if self.max_depth < 1 {
            return Err(Error::domain("max_depth must be >= 1"));
        }
        if self.base_nodes < 1 {
            return Err(Error::domain("base_nodes must be >= 1"));
        }
        Ok(())
    }
}

/// Probability levels whose `H_i`-quantiles form the evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub levels: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { levels: crate::stats::default_levels() }
    }
}

impl GridSpec {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        let g = Self { levels };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        crate::stats::validate_levels(&self.levels)
    }

    /// `H_i`-quantiles at each level.
    pub fn points(&self, model: &CiModel, i: Coordinate, opts: &QuadOptions) -> Result<Vec<f64>> {
        self.validate()?;
        self.levels.iter().map(|&p| marginal_h_quantile(model, i, p, opts)).collect()
    }
}

/// `G(x1, x2) = G1(x1) G2(x2)`.
pub fn product_law_g(model: &CiModel, x1: f64, x2: f64) -> f64 {
    model.noise1.cdf(x1) * model.noise2.cdf(x2)
}

#[inline]
fn mixture_factor(model: &CiModel, i: Coordinate, x: f64, log_v: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    model.noise(i).cdf(model.erv(i).limit_shift_at(x, log_v))
}

/// `H(x1, x2)`; either argument may be `±∞`.
pub fn limit_h(model: &CiModel, x1: f64, x2: f64, opts: &QuadOptions) -> Result<f64> {
    if x1.is_nan() || x2.is_nan() {
        return Err(Error::domain("H evaluated at NaN"));
    }
    if x1 == f64::NEG_INFINITY || x2 == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let r = integrate_unit(
        |u| {
            let log_v = -u.ln();
            mixture_factor(model, Coordinate::One, x1, log_v) * mixture_factor(model, Coordinate::Two, x2, log_v)
        },
        opts,
    )?;
    Ok(r.value.clamp(0.0, 1.0))
}

/// `H_i(x)`, the mixture with the other argument at `+∞`.
pub fn marginal_h(model: &CiModel, i: Coordinate, x: f64, opts: &QuadOptions) -> Result<f64> {
    match i {
        Coordinate::One => limit_h(model, x, f64::INFINITY, opts),
        Coordinate::Two => limit_h(model, f64::INFINITY, x, opts),
    }
}

/// Smallest `x` (to bisection precision) with `H_i(x) >= level`.
pub fn marginal_h_quantile(model: &CiModel, i: Coordinate, level: f64, opts: &QuadOptions) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("quantile level must lie in (0, 1), got {level}")));
    }
    let h = |x: f64| marginal_h(model, i, x, opts);
    let law = model.noise(i);
    let start = law.quantile_unchecked(level);
    let mut step = law.scale.max(1e-3);
    let (mut lo, mut hi) = (start - step, start + step);
    let mut expansions = 0;
    while h(lo)? >= level {
        lo -= step;
        step *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::domain("could not bracket H quantile from below"));
        }
    }
    step = law.scale.max(1e-3);
    while h(hi)? < level {
        hi += step;
        step *= 2.0;
        expansions += 1;
        if expansions > 400 {
            return Err(Error::domain("could not bracket H quantile from above"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * (1.0 + mid.abs()) || mid <= lo || mid >= hi {
            break;
        }
        if h(mid)? >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub x1: f64,
    pub x2: f64,
    pub h: f64,
    pub h1h2: f64,
    pub diff: f64,
}

/// `H`, `H1 H2` and their difference over a Cartesian grid, row-major in `xs1`.
pub fn h_surface(model: &CiModel, xs1: &[f64], xs2: &[f64], opts: &QuadOptions) -> Result<Vec<SurfaceRow>> {
    let h1 = xs1.par_iter().map(|&x| marginal_h(model, Coordinate::One, x, opts)).collect::<Result<Vec<_>>>()?;
    let h2 = xs2.par_iter().map(|&x| marginal_h(model, Coordinate::Two, x, opts)).collect::<Result<Vec<_>>>()?;
    let m = xs2.len();
    (0..xs1.len() * m)
        .into_par_iter()
        .map(|k| {
            let (j, l) = (k / m, k % m);
            let h = limit_h(model, xs1[j], xs2[l], opts)?;
            let prod = h1[j] * h2[l];
            Ok(SurfaceRow { x1: xs1[j], x2: xs2[l], h, h1h2: prod, diff: h - prod })
        })
        .collect()
}

/// Columns `x1,x2,H,H1H2,diff`.
pub fn write_surface_csv<W: Write>(rows: &[SurfaceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x1", "x2", "H", "H1H2", "diff"])?;
    for r in rows {
        w.write_record([r.x1, r.x2, r.h, r.h1h2, r.diff].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    /// `max |H - H1 H2|` over the grid.
    pub gap: f64,
    pub argmax: (f64, f64),
    pub argmax_levels: (f64, f64),
    pub points1: Vec<f64>,
    pub points2: Vec<f64>,
    pub table: Vec<SurfaceRow>,
}

/// `max |H(x1, x2) - H1(x1) H2(x2)|` over the `H_i`-quantile grid. Ties keep
/// the first grid point in row-major order.
pub fn factorization_gap(model: &CiModel, grid: &GridSpec, opts: &QuadOptions) -> Result<GapResult> {
    opts.validate()?;
    let points1 = grid.points(model, Coordinate::One, opts)?;
    let points2 = grid.points(model, Coordinate::Two, opts)?;
    let table = h_surface(model, &points1, &points2, opts)?;
    let m = points2.len();
    let (best, row) = table
        .iter()
        .enumerate()
        .fold((0usize, table[0]), |(bk, br), (k, r)| if r.diff.abs() > br.diff.abs() { (k, *r) } else { (bk, br) });
    Ok(GapResult {
        gap: row.diff.abs(),
        argmax: (row.x1, row.x2),
        argmax_levels: (grid.levels[best / m], grid.levels[best % m]),
        points1,
        points2,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{NoiseFamily, NoiseLaw};
    use crate::norming::ErvParams;
    use crate::simulate::{apply_deterministic_norming, draw_exceedances};
    use crate::stats::Ecdf;

    fn gauss_model(p1: (f64, f64), p2: (f64, f64)) -> CiModel {
        let law = NoiseLaw::standard(NoiseFamily::Gaussian);
        CiModel::new(
            ErvParams::new(1.0, p1.1, p1.0).unwrap(),
            ErvParams::new(1.0, p2.1, p2.0).unwrap(),
            law,
            law,
        )
        .unwrap()
    }

    fn canonical() -> CiModel {
        gauss_model((1.0, 0.5), (1.0, 0.5))
    }

    #[test]
    fn product_law_examples() {
        assert_eq!(product_law_g(&canonical(), 0.0, 0.0), 0.25);
        let m = canonical();
        assert_eq!(product_law_g(&m, 0.7, f64::INFINITY), m.noise1.cdf(0.7));
        let u = NoiseLaw::standard(NoiseFamily::Uniform);
        let mu = CiModel::symmetric(ErvParams::default(), u).unwrap();
        assert!((product_law_g(&mu, 0.3, 0.5) - 0.15).abs() < 1e-16);
    }

    // 30-digit adaptive quadrature of the untransformed integral over (1, ∞)
    const H_CANON_2_2: f64 = 0.555_613_446_798_406_33;
    const H1_CANON_2: f64 = 0.692_466_442_147_729_81;
    const H_CANON_0_0: f64 = 0.094_145_691_977_112_936;
    const H1_CANON_0: f64 = 0.275_384_462_080_062_66;
    const H_MIXED_1_M1: f64 = 0.040_108_338_158_252_872;
    const H_LOG_HALF: f64 = 0.195_990_731_795_708_87;
    const H1_LOG_HALF: f64 = 0.382_924_922_548_026_21;

    #[test]
    fn matches_high_precision_reference() {
        let o = QuadOptions::default();
        let m = canonical();
        assert!((limit_h(&m, 2.0, 2.0, &o).unwrap() - H_CANON_2_2).abs() < 2e-9);
        assert!((marginal_h(&m, Coordinate::One, 2.0, &o).unwrap() - H1_CANON_2).abs() < 2e-9);
        assert!((limit_h(&m, 0.0, 0.0, &o).unwrap() - H_CANON_0_0).abs() < 2e-9);
        assert!((marginal_h(&m, Coordinate::Two, 0.0, &o).unwrap() - H1_CANON_0).abs() < 2e-9);
        let mixed = gauss_model((1.0, 0.5), (1.0, 0.0));
        assert!((limit_h(&mixed, 1.0, -1.0, &o).unwrap() - H_MIXED_1_M1).abs() < 2e-9);
        let logs = gauss_model((1.0, 0.0), (1.0, 0.0));
        assert!((limit_h(&logs, 0.5, 0.5, &o).unwrap() - H_LOG_HALF).abs() < 2e-9);
        assert!((marginal_h(&logs, Coordinate::One, 0.5, &o).unwrap() - H1_LOG_HALF).abs() < 2e-9);
    }

    #[test]
    fn total_mass_and_limits() {
        let o = QuadOptions::default();
        let m = canonical();
        assert!((limit_h(&m, f64::INFINITY, f64::INFINITY, &o).unwrap() - 1.0).abs() < 1e-12);
        // 1 - H1(x) decays like E[(Z + 2)₊²] / (x + 2)² for this model
        assert!((limit_h(&m, 1e5, 1e5, &o).unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(marginal_h(&m, Coordinate::One, f64::NEG_INFINITY, &o).unwrap(), 0.0);
        // the left tail is heavy too: at large v every factor tends to G(-κ/ρ) > 0
        assert!(marginal_h(&m, Coordinate::One, -40.0, &o).unwrap() > 1e-7);
        assert!(marginal_h(&m, Coordinate::One, -1e6, &o).unwrap() < 1e-9);
        assert!(limit_h(&m, f64::NAN, 0.0, &o).is_err());
    }

    #[test]
    fn constant_coordinate_factorises() {
        let o = QuadOptions::default();
        let m = gauss_model((0.0, 0.0), (1.0, 0.5));
        for &(x1, x2) in &[(0.0, 0.0), (-1.0, 2.5), (1.3, -0.7)] {
            let h = limit_h(&m, x1, x2, &o).unwrap();
            let g1 = m.noise1.cdf(x1);
            let h2 = marginal_h(&m, Coordinate::Two, x2, &o).unwrap();
            assert!((h - g1 * h2).abs() < 1e-8);
        }
        for x in [-1.0, 0.0, 2.0] {
            assert!((marginal_h(&m, Coordinate::One, x, &o).unwrap() - m.noise1.cdf(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_and_bounded_on_grid() {
        let o = QuadOptions::default();
        let m = canonical();
        let xs: Vec<f64> = (-4..=8).map(|k| k as f64 * 0.75).collect();
        let rows = h_surface(&m, &xs, &xs, &o).unwrap();
        let n = xs.len();
        for j in 0..n {
            for l in 0..n {
                let h = rows[j * n + l].h;
                assert!((0.0..=1.0).contains(&h));
                if j > 0 {
                    assert!(h >= rows[(j - 1) * n + l].h - 1e-12);
                }
                if l > 0 {
                    assert!(h >= rows[j * n + l - 1].h - 1e-12);
                }
            }
        }
        for &x in &xs {
            let a = limit_h(&m, x, f64::INFINITY, &o).unwrap();
            let b = marginal_h(&m, Coordinate::One, x, &o).unwrap();
            assert!((a - b).abs() <= o.abs_tol);
        }
    }

    #[test]
    fn halving_tolerance_moves_less_than_tolerance() {
        let m = gauss_model((1.0, 0.5), (2.0, -0.5));
        let coarse = QuadOptions { abs_tol: 1e-6, ..Default::default() };
        let fine = QuadOptions { abs_tol: 5e-7, ..Default::default() };
        for &(x1, x2) in &[(0.0, 0.0), (1.0, -1.0), (3.0, 2.0)] {
            let a = limit_h(&m, x1, x2, &coarse).unwrap();
            let b = limit_h(&m, x1, x2, &fine).unwrap();
            assert!((a - b).abs() < coarse.abs_tol);
        }
    }

    #[test]
    fn quantiles_invert_marginal() {
        let o = QuadOptions::default();
        let m = gauss_model((1.0, 0.5), (-2.0, -0.3));
        for i in Coordinate::BOTH {
            for p in [0.05, 0.5, 0.95] {
                let x = marginal_h_quantile(&m, i, p, &o).unwrap();
                assert!((marginal_h(&m, i, x, &o).unwrap() - p).abs() < 1e-8);
            }
        }
        assert!(marginal_h_quantile(&m, Coordinate::One, 1.0, &o).is_err());
    }

    #[test]
    fn gap_vanishes_iff_a_coordinate_is_constant() {
        let o = QuadOptions::default();
        let grid = GridSpec::new(vec![0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        let cells = [(0.0, 0.0), (1.0, 0.0), (1.0, 0.5)];
        for &c1 in &cells {
            for &c2 in &cells {
                let g = factorization_gap(&gauss_model(c1, c2), &grid, &o).unwrap();
                if c1 == (0.0, 0.0) || c2 == (0.0, 0.0) {
                    assert!(g.gap <= 10.0 * o.abs_tol, "{c1:?} {c2:?}: {}", g.gap);
                } else {
                    assert!(g.gap > 0.01, "{c1:?} {c2:?}: {}", g.gap);
                }
            }
        }
    }

    #[test]
    fn scale_enters_through_kappa_over_a() {
        let o = QuadOptions::default();
        let law = NoiseLaw::standard(NoiseFamily::Gaussian);
        // (a, κ) = (2, 2) and (1, 1) share κ/a; the limit law is the same
        let a = CiModel::symmetric(ErvParams::new(2.0, 0.5, 2.0).unwrap(), law).unwrap();
        let b = canonical();
        assert!((limit_h(&a, 1.0, 0.5, &o).unwrap() - limit_h(&b, 1.0, 0.5, &o).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn marginal_matches_simulation() {
        let m = canonical();
        let s = draw_exceedances(&m, 50.0, 1_000_000, 17).unwrap();
        let w = apply_deterministic_norming(&s, &m).unwrap();
        let o = QuadOptions::default();
        let e = Ecdf::new(w.w1.clone()).unwrap();
        assert!((e.eval(2.0) - marginal_h(&m, Coordinate::One, 2.0, &o).unwrap()).abs() < 0.003);
        let joint = w.w1.iter().zip(&w.w2).filter(|(&a, &b)| a <= 2.0 && b <= 2.0).count() as f64 / 1e6;
        assert!((joint - limit_h(&m, 2.0, 2.0, &o).unwrap()).abs() < 0.003);
    }

    #[test]
    fn surface_csv_columns() {
        let m = canonical();
        let rows = h_surface(&m, &[0.0, 1.0], &[0.5], &QuadOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_surface_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x1,x2,H,H1H2,diff\n0,0.5,"));
        assert_eq!(text.lines().count(), 3);
    }
}
