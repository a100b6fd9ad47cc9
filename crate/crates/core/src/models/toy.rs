//! One-column Gaussian location models whose mean is a polynomial in `w`,
//! `x ~ N(μ(w), 1)`. With data from `N(0, 1)` these are singular at `μ = 0`.

use rand::RngCore;
use rand_distr::{Distribution, Normal};

use super::{isotropic_normal_log_density, Dataset, Model, Record, RecordShape};
use crate::error::{Error, Result};

const HALF_LOG_TWO_PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanMap {
    /// `μ(w) = w²`, one parameter.
    Square,
    /// `μ(a, b) = ab`, two parameters.
    Product,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMeanModel {
    map: MeanMap,
    prior_std: f64,
}

impl PolynomialMeanModel {
    pub fn new(map: MeanMap, prior_std: f64) -> Result<Self> {
        if !(prior_std > 0.0 && prior_std.is_finite()) {
            return Err(Error::Config("prior_std must be positive".into()));
        }
        Ok(PolynomialMeanModel { map, prior_std })
    }

    pub fn square(prior_std: f64) -> Result<Self> {
        Self::new(MeanMap::Square, prior_std)
    }

    pub fn product(prior_std: f64) -> Result<Self> {
        Self::new(MeanMap::Product, prior_std)
    }

    pub fn mean(&self, w: &[f64]) -> f64 {
        match self.map {
            MeanMap::Square => w[0] * w[0],
            MeanMap::Product => w[0] * w[1],
        }
    }
}

impl Model for PolynomialMeanModel {
    fn dim(&self) -> usize {
        match self.map {
            MeanMap::Square => 1,
            MeanMap::Product => 2,
        }
    }

    fn label(&self) -> String {
        format!("{:?}-mean(prior_std={})", self.map, self.prior_std).to_lowercase()
    }

    fn log_likelihood(&self, w: &[f64], record: &Record) -> f64 {
        let Record::Plain(x) = record else {
            return f64::NAN;
        };
        let r = x[0] - self.mean(w);
        -HALF_LOG_TWO_PI - 0.5 * r * r
    }

    fn log_prior(&self, w: &[f64]) -> f64 {
        isotropic_normal_log_density(w, self.prior_std)
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let dist = Normal::new(0.0, self.prior_std).expect("validated std");
        (0..self.dim()).map(|_| dist.sample(rng)).collect()
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        match data.shape() {
            RecordShape::Plain(1) => Ok(()),
            other => Err(Error::Config(format!("model expects one plain column, data has {other:?}"))),
        }
    }

    fn total_nll(&self, w: &[f64], data: &Dataset) -> f64 {
        let Some(m) = data.plain_moments() else {
            return f64::NAN;
        };
        let n = data.n() as f64;
        let mu = self.mean(w);
        n * HALF_LOG_TWO_PI + 0.5 * (m.sum_sq[0] - 2.0 * mu * m.sum[0] + n * mu * mu)
    }
}
