//! Brute-force trapezoid integration of tempered posteriors for `d ≤ 3`.
//!
//! Integrand values are accumulated in log space with a running maximum, one
//! slab of the first axis at a time; slabs are combined in index order so the
//! result does not depend on thread scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::models::{Dataset, Model};

const MAX_DIM: usize = 3;
const MAX_POINTS: f64 = 1e8;
const BOUNDARY_WARN_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl Axis {
    fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.points - 1) as f64
    }

    fn node(&self, i: usize) -> f64 {
        self.lower + i as f64 * self.spacing()
    }

    fn log_weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i + 1 == self.points {
            (0.5 * h).ln()
        } else {
            h.ln()
        }
    }

    /// The half-resolution weight of node `i`, if `i` belongs to the coarse grid.
    fn coarse_log_weight(&self, i: usize) -> Option<f64> {
        if i % 2 != 0 {
            return None;
        }
        let h = 2.0 * self.spacing();
        Some(if i == 0 || i + 1 == self.points { (0.5 * h).ln() } else { h.ln() })
    }

    fn has_coarse(&self) -> bool {
        (self.points - 1) % 2 == 0
    }
}

/// A tensor-product grid, one [`Axis`] per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        let g = GridSpec { axes };
        g.validate()?;
        Ok(g)
    }

    /// Same bounds and resolution on every axis.
    pub fn cube(dim: usize, lower: f64, upper: f64, points: usize) -> Result<Self> {
        Self::new(vec![Axis { lower, upper, points }; dim])
    }

    /// `center ± half_width` per axis.
    pub fn centered(center: &[f64], half_width: &[f64], points: usize) -> Result<Self> {
        Self::new(
            center
                .iter()
                .zip(half_width)
                .map(|(c, h)| Axis { lower: c - h, upper: c + h, points })
                .collect(),
        )
    }

    /// Default grid for a zero-mean prior: `±8` prior standard deviations, 401 points.
    pub fn around_prior(dim: usize, prior_std: f64) -> Result<Self> {
        Self::cube(dim, -8.0 * prior_std, 8.0 * prior_std, 401)
    }

    pub fn total_points(&self) -> f64 {
        self.axes.iter().map(|a| a.points as f64).product()
    }

    pub fn validate(&self) -> Result<()> {
        for (k, a) in self.axes.iter().enumerate() {
            if !a.lower.is_finite() || !a.upper.is_finite() || !(a.lower < a.upper) {
                return Err(Error::Config(format!("axis {k}: need finite lower < upper")));
            }
            if a.points < 16 {
                return Err(Error::Config(format!("axis {k}: need at least 16 points")));
            }
        }
        if self.total_points() > MAX_POINTS {
            return Err(Error::Config(format!(
                "grid has {} points, limit is {MAX_POINTS}",
                self.total_points()
            )));
        }
        Ok(())
    }

    /// Doubles the resolution: `points → 2·points − 1`, keeping every old node.
    pub fn refined(&self) -> Result<Self> {
        Self::new(
            self.axes
                .iter()
                .map(|a| Axis { points: 2 * a.points - 1, ..*a })
                .collect(),
        )
    }
}

/// Streaming `log Σ exp(v)` together with `Σ exp(v)·g`, both relative to `max`.
#[derive(Debug, Clone, Copy)]
struct LogAccumulator {
    max: f64,
    mass: f64,
    moment: f64,
}

impl LogAccumulator {
    const EMPTY: Self = LogAccumulator { max: f64::NEG_INFINITY, mass: 0.0, moment: 0.0 };

    fn add(&mut self, log_value: f64, g: f64) {
        if log_value == f64::NEG_INFINITY {
            return;
        }
        if log_value > self.max {
            let scale = (self.max - log_value).exp();
            self.mass *= scale;
            self.moment *= scale;
            self.max = log_value;
        }
        let e = (log_value - self.max).exp();
        self.mass += e;
        self.moment += e * g;
    }

    fn merge(&mut self, other: &Self) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max > self.max {
            let scale = (self.max - other.max).exp();
            self.mass *= scale;
            self.moment *= scale;
            self.max = other.max;
        }
        let s = (other.max - self.max).exp();
        self.mass += other.mass * s;
        self.moment += other.moment * s;
    }

    fn log_mass(&self) -> f64 {
        self.max + self.mass.ln()
    }

    fn mean(&self) -> f64 {
        self.moment / self.mass
    }
}

#[derive(Debug, Clone, Copy)]
struct Slab {
    full: LogAccumulator,
    coarse: LogAccumulator,
    boundary: LogAccumulator,
    bad: Option<usize>,
}

/// Everything one grid pass produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridIntegral {
    pub beta: f64,
    /// `log ∫ exp(−β n L_n(w)) φ(w) dw`.
    pub log_partition: f64,
    /// `E_w^β[n L_n(w)]`.
    pub expected_nll: f64,
    /// Full-resolution minus half-resolution values, when every axis has an odd point count.
    pub refinement: Option<(f64, f64)>,
    /// Share of integrand mass on the outermost grid layer.
    pub boundary_fraction: f64,
    pub warnings: Vec<Warning>,
}

/// A single grid quantity with its refinement estimate and warnings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridValue {
    pub value: f64,
    pub refinement: Option<f64>,
    pub warnings: Vec<Warning>,
}

/// Integrates `exp(−β n L_n(w)) φ(w)` and `n L_n(w)` against it over `grid`.
pub fn integrate(model: &dyn Model, data: &Dataset, beta: f64, grid: &GridSpec) -> Result<GridIntegral> {
    let d = model.dim();
    if d > MAX_DIM {
        return Err(Error::Unsupported(format!("grid quadrature supports d <= {MAX_DIM}, model has d = {d}")));
    }
    if grid.axes.len() != d {
        return Err(Error::Config(format!("grid has {} axes, model has d = {d}", grid.axes.len())));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Config(format!("beta must be finite and >= 0, got {beta}")));
    }
    grid.validate()?;
    model.check_data(data)?;

    let has_coarse = grid.axes.iter().all(Axis::has_coarse);
    let first = grid.axes.first().map_or(1, |a| a.points);
    let rest: Vec<Axis> = grid.axes.iter().skip(1).copied().collect();
    let rest_total: usize = rest.iter().map(|a| a.points).product();

    let slabs: Vec<Slab> = (0..first)
        .into_par_iter()
        .map(|i0| {
            let mut slab = Slab {
                full: LogAccumulator::EMPTY,
                coarse: LogAccumulator::EMPTY,
                boundary: LogAccumulator::EMPTY,
                bad: None,
            };
            let mut idx = vec![0usize; d];
            let mut w = vec![0.0; d];
            for flat in 0..rest_total {
                if d > 0 {
                    idx[0] = i0;
                    let mut rem = flat;
                    for k in (1..d).rev() {
                        idx[k] = rem % grid.axes[k].points;
                        rem /= grid.axes[k].points;
                    }
                }
                for k in 0..d {
                    w[k] = grid.axes[k].node(idx[k]);
                }
                let lp = model.log_prior(&w);
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                let nll = model.total_nll(&w, data);
                if nll.is_nan() || lp.is_nan() || nll == f64::NEG_INFINITY {
                    slab.bad.get_or_insert(flat + i0 * rest_total);
                    continue;
                }
                if nll == f64::INFINITY && beta > 0.0 {
                    continue;
                }
                let log_integrand = if beta == 0.0 { lp } else { -beta * nll + lp };
                let log_w: f64 = (0..d).map(|k| grid.axes[k].log_weight(idx[k])).sum();
                slab.full.add(log_integrand + log_w, nll);
                if (0..d).any(|k| idx[k] == 0 || idx[k] + 1 == grid.axes[k].points) {
                    slab.boundary.add(log_integrand + log_w, 0.0);
                }
                if has_coarse {
                    let coarse: Option<f64> = (0..d).map(|k| grid.axes[k].coarse_log_weight(idx[k])).sum();
                    if let Some(cw) = coarse {
                        slab.coarse.add(log_integrand + cw, nll);
                    }
                }
            }
            slab
        })
        .collect();

    let mut full = LogAccumulator::EMPTY;
    let mut coarse = LogAccumulator::EMPTY;
    let mut boundary = LogAccumulator::EMPTY;
    for s in &slabs {
        if let Some(at) = s.bad {
            return Err(Error::Numerical(format!("integrand is not a number at grid point {at}")));
        }
        full.merge(&s.full);
        coarse.merge(&s.coarse);
        boundary.merge(&s.boundary);
    }
    if full.mass == 0.0 || !full.log_mass().is_finite() {
        return Err(Error::Numerical("integrand vanishes on the whole grid".into()));
    }

    let log_partition = full.log_mass();
    let expected_nll = full.mean();
    let boundary_fraction = if boundary.mass > 0.0 {
        (boundary.log_mass() - log_partition).exp()
    } else {
        0.0
    };
    let mut warnings = Vec::new();
    if boundary_fraction > BOUNDARY_WARN_FRACTION {
        warnings.push(Warning::BoundaryMass { fraction: boundary_fraction });
    }
    let refinement = (has_coarse && coarse.mass > 0.0)
        .then(|| (log_partition - coarse.log_mass(), expected_nll - coarse.mean()));
    Ok(GridIntegral {
        beta,
        log_partition,
        expected_nll,
        refinement,
        boundary_fraction,
        warnings,
    })
}

/// `log ∫ exp(−β n L_n(w)) φ(w) dw` by the trapezoid rule; equals `−F` at `β = 1`.
pub fn grid_log_partition(model: &dyn Model, data: &Dataset, beta: f64, grid: &GridSpec) -> Result<GridValue> {
    let r = integrate(model, data, beta, grid)?;
    Ok(GridValue {
        value: r.log_partition,
        refinement: r.refinement.map(|x| x.0),
        warnings: r.warnings,
    })
}

/// `E_w^β[n L_n(w)]` as a ratio of two grid integrals from one pass.
pub fn grid_expected_nll(model: &dyn Model, data: &Dataset, beta: f64, grid: &GridSpec) -> Result<GridValue> {
    let r = integrate(model, data, beta, grid)?;
    Ok(GridValue {
        value: r.expected_nll,
        refinement: r.refinement.map(|x| x.1),
        warnings: r.warnings,
    })
}
