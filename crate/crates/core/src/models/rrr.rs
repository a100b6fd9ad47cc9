//! Reduced rank regression `y = B A x + ε`, `ε ~ N(0, σ²I_N)`.
//!
//! Parameters are flattened as `A` (H×M) row-major followed by `B` (N×H)
//! row-major, so `d = H·M + N·H`. The input density `r(x)` is left out of the
//! likelihood: it does not depend on `w` and cancels from every comparison.

use std::f64::consts::PI;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{isotropic_normal_log_density, Dataset, Model, Record, RecordShape, TrueDensity};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedRankModel {
    inputs: usize,
    outputs: usize,
    rank: usize,
    sigma: f64,
    prior_std: f64,
}

impl ReducedRankModel {
    pub fn new(inputs: usize, outputs: usize, rank: usize, sigma: f64, prior_std: f64) -> Result<Self> {
        if inputs == 0 || outputs == 0 || rank == 0 {
            return Err(Error::Config(format!(
                "reduced rank regression needs M, N, H >= 1 (got {inputs}, {outputs}, {rank})"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) || !(prior_std > 0.0 && prior_std.is_finite()) {
            return Err(Error::Config("sigma and prior_std must be positive".into()));
        }
        Ok(ReducedRankModel {
            inputs,
            outputs,
            rank,
            sigma,
            prior_std,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn prior_std(&self) -> f64 {
        self.prior_std
    }

    /// Splits a flat parameter into `(A, B)` row-major blocks.
    pub fn split<'a>(&self, w: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        w.split_at(self.rank * self.inputs)
    }

    /// Flattens `(A, B)` into a parameter vector.
    pub fn join(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.dim());
        w.extend_from_slice(a);
        w.extend_from_slice(b);
        w
    }

    /// The N×M coefficient matrix `C = B A`, row-major.
    pub fn coefficient(&self, w: &[f64]) -> Vec<f64> {
        let (a, b) = self.split(w);
        let (m, q, h) = (self.inputs, self.outputs, self.rank);
        let mut c = vec![0.0; q * m];
        for i in 0..q {
            for k in 0..h {
                let bik = b[i * h + k];
                let arow = &a[k * m..(k + 1) * m];
                let crow = &mut c[i * m..(i + 1) * m];
                for (cj, aj) in crow.iter_mut().zip(arow) {
                    *cj += bik * aj;
                }
            }
        }
        c
    }

    fn log_norm(&self) -> f64 {
        -0.5 * self.outputs as f64 * (2.0 * PI * self.sigma * self.sigma).ln()
    }
}

impl Model for ReducedRankModel {
    fn dim(&self) -> usize {
        self.rank * (self.inputs + self.outputs)
    }

    fn label(&self) -> String {
        format!(
            "rrr(M={},N={},H={},sigma={},prior_std={})",
            self.inputs, self.outputs, self.rank, self.sigma, self.prior_std
        )
    }

    fn log_likelihood(&self, w: &[f64], record: &Record) -> f64 {
        let Record::Pair { x, y } = record else {
            return f64::NAN;
        };
        let c = self.coefficient(w);
        let m = self.inputs;
        let ss: f64 = y
            .iter()
            .enumerate()
            .map(|(i, yi)| {
                let fit: f64 = c[i * m..(i + 1) * m].iter().zip(x).map(|(a, b)| a * b).sum();
                (yi - fit) * (yi - fit)
            })
            .sum();
        self.log_norm() - ss / (2.0 * self.sigma * self.sigma)
    }

    fn log_prior(&self, w: &[f64]) -> f64 {
        isotropic_normal_log_density(w, self.prior_std)
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.dim())
            .map(|_| self.prior_std * standard_normal(rng))
            .collect()
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        match data.shape() {
            RecordShape::Pair { inputs, outputs } if inputs == self.inputs && outputs == self.outputs => Ok(()),
            other => Err(Error::Config(format!(
                "model expects (x: {}, y: {}) records, data has {other:?}",
                self.inputs, self.outputs
            ))),
        }
    }

    /// Uses `Σ‖y − Cx‖² = Σ‖y‖² − 2⟨C, Σ y xᵀ⟩ + ⟨C Σ x xᵀ, C⟩`, so the cost is
    /// independent of `n`.
    fn total_nll(&self, w: &[f64], data: &Dataset) -> f64 {
        let Some(mom) = data.regression_moments() else {
            return f64::NAN;
        };
        let c = self.coefficient(w);
        let m = self.inputs;
        let mut cross = 0.0;
        let mut quad = 0.0;
        for i in 0..self.outputs {
            let crow = &c[i * m..(i + 1) * m];
            for a in 0..m {
                cross += crow[a] * mom.yx[i * m + a];
                let xx_row = &mom.xx[a * m..(a + 1) * m];
                let t: f64 = crow.iter().zip(xx_row).map(|(u, v)| u * v).sum();
                quad += crow[a] * t;
            }
        }
        let ss = (mom.yy - 2.0 * cross + quad).max(0.0);
        -(data.n() as f64) * self.log_norm() + ss / (2.0 * self.sigma * self.sigma)
    }
}

fn standard_normal(rng: &mut dyn RngCore) -> f64 {
    StandardNormal.sample(rng)
}

/// The generating pair `w₀ = (A₀, B₀)` plus noise and input scales.
///
/// `a0` is H₀×M and `b0` is N×H₀, nested row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrrTruth {
    pub a0: Vec<Vec<f64>>,
    pub b0: Vec<Vec<f64>>,
    pub sigma: f64,
    pub x_std: f64,
}

impl RrrTruth {
    /// Draws `A₀`, `B₀` entrywise from `N(0, coef_std²)`.
    pub fn draw(config: &RrrDataConfig, rng: &mut dyn RngCore) -> Result<Self> {
        config.validate()?;
        let coef = |rng: &mut dyn RngCore| config.coef_std * standard_normal(rng);
        let a0 = (0..config.true_rank)
            .map(|_| (0..config.inputs).map(|_| coef(rng)).collect())
            .collect();
        let b0 = (0..config.outputs)
            .map(|_| (0..config.true_rank).map(|_| coef(rng)).collect())
            .collect();
        Ok(RrrTruth {
            a0,
            b0,
            sigma: config.sigma,
            x_std: config.x_std,
        })
    }

    pub fn inputs(&self) -> usize {
        self.a0.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.b0.len()
    }

    pub fn true_rank(&self) -> usize {
        self.a0.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !(self.x_std > 0.0) {
            return Err(Error::Config("truth needs sigma > 0 and x_std > 0".into()));
        }
        let (m, h0) = (self.inputs(), self.true_rank());
        if m == 0 || self.a0.iter().any(|r| r.len() != m) || self.b0.iter().any(|r| r.len() != h0) {
            return Err(Error::Config("truth matrices have inconsistent shapes".into()));
        }
        Ok(())
    }

    /// `B₀ A₀ x`.
    pub fn mean(&self, x: &[f64]) -> Vec<f64> {
        let ax: Vec<f64> = self
            .a0
            .iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
        self.b0
            .iter()
            .map(|row| row.iter().zip(&ax).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Draws `n` records: `x ~ N(0, x_std²I_M)`, `y = B₀A₀x + N(0, σ²I_N)`.
    pub fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        let xdist = Normal::new(0.0, self.x_std).map_err(|e| Error::Config(e.to_string()))?;
        let noise = Normal::new(0.0, self.sigma).map_err(|e| Error::Config(e.to_string()))?;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..self.inputs()).map(|_| xdist.sample(rng)).collect();
            let y: Vec<f64> = self.mean(&x).into_iter().map(|m| m + noise.sample(rng)).collect();
            xs.push(x);
            ys.push(y);
        }
        Dataset::regression(xs, ys)
    }
}

impl TrueDensity for RrrTruth {
    fn log_density(&self, record: &Record) -> f64 {
        let Record::Pair { x, y } = record else {
            return f64::NAN;
        };
        let ss: f64 = self
            .mean(x)
            .iter()
            .zip(y)
            .map(|(m, v)| (v - m) * (v - m))
            .sum();
        -0.5 * y.len() as f64 * (2.0 * PI * self.sigma * self.sigma).ln()
            - ss / (2.0 * self.sigma * self.sigma)
    }
}

/// Simulation settings for [`generate_rrr_dataset`]. Defaults reproduce the
/// published setup: M = N = 6, H₀ = 3, n = 500, σ = 0.1, x ~ N(0, 3²I),
/// coefficients ~ N(0, 0.2²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrrDataConfig {
    pub inputs: usize,
    pub outputs: usize,
    pub true_rank: usize,
    pub n: usize,
    pub sigma: f64,
    pub x_std: f64,
    pub coef_std: f64,
}

impl Default for RrrDataConfig {
    fn default() -> Self {
        RrrDataConfig {
            inputs: 6,
            outputs: 6,
            true_rank: 3,
            n: 500,
            sigma: 0.1,
            x_std: 3.0,
            coef_std: 0.2,
        }
    }
}

impl RrrDataConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.outputs == 0 || self.true_rank == 0 || self.n == 0 {
            return Err(Error::Config("M, N, H0 and n must be positive".into()));
        }
        if !(self.sigma > 0.0) || !(self.x_std > 0.0) || !(self.coef_std >= 0.0) {
            return Err(Error::Config("sigma, x_std must be > 0 and coef_std >= 0".into()));
        }
        Ok(())
    }
}

/// Draws a fresh truth and `n` records from it, all from one seeded stream.
pub fn generate_rrr_dataset(config: &RrrDataConfig, seed: u64) -> Result<(Dataset, RrrTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = RrrTruth::draw(config, &mut rng)?;
    let data = truth.sample(config.n, &mut rng)?;
    Ok((data, truth))
}
