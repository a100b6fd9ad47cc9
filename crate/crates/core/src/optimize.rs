//! Derivative-free local minimisation (Nelder–Mead with restarts).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Initial simplex edge length.
    pub step: f64,
    /// Converged when the spread of objective values over the simplex falls
    /// below `ftol·(1 + |f_best|)` and its diameter below `xtol·(1 + ‖x_best‖∞)`.
    pub ftol: f64,
    pub xtol: f64,
    pub max_evals: usize,
    /// Number of fresh-simplex restarts from the incumbent.
    pub max_restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            step: 0.1,
            ftol: 1e-8,
            xtol: 1e-8,
            max_evals: 200_000,
            max_restarts: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn simplex_run(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, opts: &NelderMeadOptions, budget: usize) -> Minimum {
    let d = x0.len();
    if d == 0 {
        return Minimum { x: vec![], value: f(x0), evaluations: 1, converged: true };
    }
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    pts.push(x0.to_vec());
    for k in 0..d {
        let mut p = x0.to_vec();
        p[k] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| sanitize(f(p))).collect();
    let mut evals = d + 1;
    let mut converged = false;

    while evals < budget {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let best = vals[0];
        let spread = vals[d] - best;
        let scale_x = 1.0 + pts[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diameter = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0f64, f64::max);
        if spread <= opts.ftol * (1.0 + best.abs()) && diameter <= opts.xtol * scale_x {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..d)
            .map(|k| pts[..d].iter().map(|p| p[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[d])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = sanitize(f(&xr));
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = sanitize(f(&xe));
            evals += 1;
            if fe < fr {
                pts[d] = xe;
                vals[d] = fe;
            } else {
                pts[d] = xr;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            pts[d] = xr;
            vals[d] = fr;
        } else {
            let (xc, fc) = if fr < vals[d] {
                let xc = along(-0.5);
                let fc = sanitize(f(&xc));
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = sanitize(f(&xc));
                (xc, fc)
            };
            evals += 1;
            if fc < vals[d].min(fr) {
                pts[d] = xc;
                vals[d] = fc;
            } else {
                for i in 1..=d {
                    let shrunk: Vec<f64> = pts[i].iter().zip(&pts[0]).map(|(p, b)| b + 0.5 * (p - b)).collect();
                    vals[i] = sanitize(f(&shrunk));
                    pts[i] = shrunk;
                }
                evals += d;
            }
        }
    }
    let i = (0..=d).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Minimum { x: pts[i].clone(), value: vals[i], evaluations: evals, converged }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimises `f` from `x0`, restarting with a fresh, smaller simplex at the
/// incumbent until a restart improves the objective by less than `ftol`.
pub fn minimize(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> Result<Minimum> {
    if !f(x0).is_finite() {
        return Err(Error::Optimization("objective is not finite at the start point".into()));
    }
    let mut step = opts.step;
    let mut evals = 0;
    let mut current = simplex_run(f, x0, step, opts, opts.max_evals);
    evals += current.evaluations;
    for _ in 0..opts.max_restarts {
        if evals >= opts.max_evals {
            break;
        }
        step = (step * 0.5).max(1e3 * opts.xtol);
        let next = simplex_run(f, &current.x, step, opts, opts.max_evals - evals);
        evals += next.evaluations;
        let improvement = current.value - next.value;
        let done = next.converged && improvement <= opts.ftol * (1.0 + next.value.abs());
        if next.value <= current.value {
            current = next;
        }
        if done {
            current.converged = true;
            break;
        }
        current.converged = false;
    }
    current.evaluations = evals;
    Ok(current)
}
