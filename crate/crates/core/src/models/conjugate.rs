//! Isotropic normal location model with a conjugate normal prior.
//!
//! `p(x|w) = N(x; w, s²I_d)`, `φ(w) = N(w; 0, t²I_d)`. Every tempered
//! posterior is Gaussian, so the partition function and the posterior mean of
//! `n·L_n` have closed forms; this is the regular-model oracle.

use std::f64::consts::PI;

use rand::RngCore;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{isotropic_normal_log_density, ClosedFormOracle, Dataset, Model, Record, RecordShape, TrueDensity};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateNormalModel {
    dim: usize,
    noise_std: f64,
    prior_std: f64,
}

/// Per-coordinate tempered posterior `N(mean, 1/precision)`.
struct Tempered {
    mean: f64,
    precision: f64,
}

impl ConjugateNormalModel {
    pub fn new(dim: usize, noise_std: f64, prior_std: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("conjugate model needs d >= 1".into()));
        }
        if !(noise_std > 0.0 && noise_std.is_finite()) || !(prior_std > 0.0 && prior_std.is_finite()) {
            return Err(Error::Config("noise_std and prior_std must be positive".into()));
        }
        Ok(ConjugateNormalModel {
            dim,
            noise_std,
            prior_std,
        })
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn prior_std(&self) -> f64 {
        self.prior_std
    }

    fn tempered(&self, beta: f64, n: f64, sum: f64) -> Tempered {
        let s2 = self.noise_std * self.noise_std;
        let precision = beta * n / s2 + 1.0 / (self.prior_std * self.prior_std);
        Tempered {
            mean: beta * sum / s2 / precision,
            precision,
        }
    }

    fn moments<'a>(&self, data: &'a Dataset) -> Result<&'a super::PlainMoments> {
        self.check_data(data)?;
        Ok(data.plain_moments().expect("plain data checked"))
    }

    /// Mean and variance of coordinate `k` under the tempered posterior at `beta`.
    pub fn posterior_moments(&self, beta: f64, data: &Dataset) -> Result<Vec<(f64, f64)>> {
        let mom = self.moments(data)?;
        let n = data.n() as f64;
        Ok(mom
            .sum
            .iter()
            .map(|&s| {
                let t = self.tempered(beta, n, s);
                (t.mean, 1.0 / t.precision)
            })
            .collect())
    }

    /// The maximum likelihood estimate, the sample mean.
    pub fn mle(&self, data: &Dataset) -> Result<Vec<f64>> {
        let mom = self.moments(data)?;
        Ok(mom.sum.iter().map(|s| s / data.n() as f64).collect())
    }

    fn log_norm(&self) -> f64 {
        -0.5 * self.dim as f64 * (2.0 * PI * self.noise_std * self.noise_std).ln()
    }
}

impl Model for ConjugateNormalModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> String {
        format!(
            "conjugate(d={},noise_std={},prior_std={})",
            self.dim, self.noise_std, self.prior_std
        )
    }

    fn log_likelihood(&self, w: &[f64], record: &Record) -> f64 {
        let Record::Plain(x) = record else {
            return f64::NAN;
        };
        let ss: f64 = x.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
        self.log_norm() - ss / (2.0 * self.noise_std * self.noise_std)
    }

    fn log_prior(&self, w: &[f64]) -> f64 {
        isotropic_normal_log_density(w, self.prior_std)
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let dist = Normal::new(0.0, self.prior_std).expect("validated std");
        (0..self.dim).map(|_| dist.sample(rng)).collect()
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        match data.shape() {
            RecordShape::Plain(d) if d == self.dim => Ok(()),
            other => Err(Error::Config(format!(
                "model expects plain records of length {}, data has {other:?}",
                self.dim
            ))),
        }
    }

    fn total_nll(&self, w: &[f64], data: &Dataset) -> f64 {
        let Some(mom) = data.plain_moments() else {
            return f64::NAN;
        };
        let n = data.n() as f64;
        let quad: f64 = (0..self.dim)
            .map(|k| (mom.sum_sq[k] - 2.0 * w[k] * mom.sum[k] + n * w[k] * w[k]).max(0.0))
            .sum();
        -n * self.log_norm() + quad / (2.0 * self.noise_std * self.noise_std)
    }

    fn oracle(&self) -> Option<&dyn ClosedFormOracle> {
        Some(self)
    }
}

impl ClosedFormOracle for ConjugateNormalModel {
    fn log_partition(&self, beta: f64, data: &Dataset) -> Result<f64> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Config(format!("beta must be finite and >= 0, got {beta}")));
        }
        let mom = self.moments(data)?;
        let n = data.n() as f64;
        let s2 = self.noise_std * self.noise_std;
        let t2 = self.prior_std * self.prior_std;
        let mut total = beta * n * self.log_norm();
        for k in 0..self.dim {
            let t = self.tempered(beta, n, mom.sum[k]);
            let b = beta * mom.sum[k] / s2;
            total += -beta * mom.sum_sq[k] / (2.0 * s2) + b * b / (2.0 * t.precision)
                - 0.5 * (t.precision * t2).ln();
        }
        Ok(total)
    }

    fn expected_nll(&self, beta: f64, data: &Dataset) -> Result<f64> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Config(format!("beta must be finite and >= 0, got {beta}")));
        }
        let mom = self.moments(data)?;
        let n = data.n() as f64;
        let s2 = self.noise_std * self.noise_std;
        let mut total = -n * self.log_norm();
        for k in 0..self.dim {
            let t = self.tempered(beta, n, mom.sum[k]);
            let second = t.mean * t.mean + 1.0 / t.precision;
            total += (mom.sum_sq[k] - 2.0 * t.mean * mom.sum[k] + n * second) / (2.0 * s2);
        }
        Ok(total)
    }
}

/// Generating distribution `N(mean, noise_std²·I)` for conjugate-model data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateTruth {
    pub mean: Vec<f64>,
    pub noise_std: f64,
}

impl ConjugateTruth {
    pub fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        let noise = Normal::new(0.0, self.noise_std).map_err(|e| Error::Config(e.to_string()))?;
        let rows = (0..n)
            .map(|_| self.mean.iter().map(|m| m + noise.sample(rng)).collect())
            .collect();
        Dataset::plain(rows)
    }
}

impl TrueDensity for ConjugateTruth {
    fn log_density(&self, record: &Record) -> f64 {
        let Record::Plain(x) = record else {
            return f64::NAN;
        };
        let s2 = self.noise_std * self.noise_std;
        let ss: f64 = x.iter().zip(&self.mean).map(|(a, b)| (a - b) * (a - b)).sum();
        -0.5 * x.len() as f64 * (2.0 * PI * s2).ln() - ss / (2.0 * s2)
    }
}
