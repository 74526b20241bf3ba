//! Nelder–Mead downhill simplex.
//!
//! Infinite objective values are allowed and act as hard walls, which is how
//! the fitter expresses parameter bounds.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Stop when `f_max - f_min <= f_tol * (1 + |f_min|)` ...
    pub f_tol: f64,
    /// ... and every vertex lies within `x_tol * (1 + |x|)` of the best one.
    pub x_tol: f64,
    pub max_evals: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { f_tol: 1e-11, x_tol: 1e-7, max_evals: 4000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    steps: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    let dim = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    pts.push(start.to_vec());
    for k in 0..dim {
        let mut p = start.to_vec();
        p[k] += steps[k];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, &mut evals)).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=dim).collect();
    while evals < opts.max_evals {
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]).then(i.cmp(&j)));
        let (best, worst, second) = (order[0], order[dim], order[dim - 1]);
        let f_best = vals[best];
        if f_best.is_finite() && vals[worst] - f_best <= opts.f_tol * (1.0 + f_best.abs()) {
            let spread_ok = pts.iter().all(|p| {
                p.iter().zip(&pts[best]).all(|(a, b)| (a - b).abs() <= opts.x_tol * (1.0 + b.abs()))
            });
            if spread_ok {
                converged = true;
                break;
            }
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|k| order[..dim].iter().map(|&i| pts[i][k]).sum::<f64>() / dim as f64)
            .collect();
        let along = |coef: f64| -> Vec<f64> {
            centroid.iter().zip(&pts[worst]).map(|(c, w)| c + coef * (c - w)).collect()
        };

        let reflected = along(1.0);
        let f_r = eval(&reflected, &mut evals);
        if f_r < vals[best] {
            let expanded = along(2.0);
            let f_e = eval(&expanded, &mut evals);
            if f_e < f_r {
                pts[worst] = expanded;
                vals[worst] = f_e;
            } else {
                pts[worst] = reflected;
                vals[worst] = f_r;
            }
            continue;
        }
        if f_r < vals[second] {
            pts[worst] = reflected;
            vals[worst] = f_r;
            continue;
        }
        let (contracted, f_c) = if f_r < vals[worst] {
            let c = along(0.5);
            let fc = eval(&c, &mut evals);
            (c, fc)
        } else {
            let c = along(-0.5);
            let fc = eval(&c, &mut evals);
            (c, fc)
        };
        if f_c < vals[worst].min(f_r) {
            pts[worst] = contracted;
            vals[worst] = f_c;
            continue;
        }
        // shrink towards the best vertex
        let anchor = pts[best].clone();
        for &i in &order[1..] {
            for (x, a) in pts[i].iter_mut().zip(&anchor) {
                *x = a + 0.5 * (*x - a);
            }
            vals[i] = eval(&pts[i], &mut evals);
        }
    }
    let best = (0..=dim).min_by(|&i, &j| vals[i].total_cmp(&vals[j]).then(i.cmp(&j))).unwrap();
    SimplexResult { x: pts[best].clone(), f: vals[best], iterations, evaluations: evals, converged }
}
