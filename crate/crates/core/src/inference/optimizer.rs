//! Box-constrained Nelder–Mead minimization.
//!
//! Trial points are projected onto the box.  Expansion, contraction and
//! shrink coefficients follow the dimension-adaptive choice of Gao and Han
//! (2012), which behaves better than the classical constants beyond a
//! handful of dimensions.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ... and the simplex diameter (max-norm) falls below this.
    pub x_tol: f64,
    /// Initial edge length as a fraction of each box width.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_evals: 2000,
            f_tol: 1e-7,
            x_tol: 1e-5,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Minimizes `f` from `x0` inside `bounds`.  Non-finite values count as `+inf`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], bounds: &[(f64, f64)], opts: &NelderMeadOptions) -> LocalResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(n, bounds.len());
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let nf = n as f64;
    let (alpha, beta, gamma, delta) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut start = x0.to_vec();
    project(&mut start, bounds);
    let mut simplex: Vec<Vec<f64>> = vec![start.clone()];
    for i in 0..n {
        let (lo, hi) = bounds[i];
        let step = opts.initial_step * (hi - lo);
        let mut v = start.clone();
        v[i] = if v[i] + step <= hi { v[i] + step } else { v[i] - step };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    let mut converged = false;
    let mut order: Vec<usize> = (0..=n).collect();
    while evals < opts.max_evals {
        // Stable sort keeps earlier vertices ahead on ties.
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];

        let spread = values[worst] - values[best];
        let diameter = simplex
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= opts.f_tol && diameter <= opts.x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for &k in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&simplex[k]) {
                *c += v / nf;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            project(&mut p, bounds);
            p
        };

        let xr = along(alpha);
        let fr = eval(&xr, &mut evals);
        if fr < values[best] {
            let xe = along(alpha * beta);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst] = xr;
            values[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[worst] {
            let xc = along(alpha * gamma);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-gamma);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < values[worst].min(fr) {
            simplex[worst] = xc;
            values[worst] = fc;
            continue;
        }
        // Shrink towards the best vertex.
        let anchor = simplex[best].clone();
        for &k in &order[1..] {
            let mut p: Vec<f64> = simplex[k]
                .iter()
                .zip(&anchor)
                .map(|(v, b)| b + delta * (v - b))
                .collect();
            project(&mut p, bounds);
            values[k] = eval(&p, &mut evals);
            simplex[k] = p;
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .unwrap_or(0);
    LocalResult {
        x: simplex[best].clone(),
        f: values[best],
        evals,
        converged,
    }
}
