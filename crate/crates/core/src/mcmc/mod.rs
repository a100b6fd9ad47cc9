//! Random-walk Metropolis sampling of the tempered posterior
//! `∝ exp(−β n L_n(w)) φ(w)`.
//!
//! Proposals are isotropic normal. During burn-in the proposal scale follows a
//! Robbins–Monro recursion on `log(step)` with gain `t^(-0.6)` toward the
//! target acceptance rate; it is frozen before any draw is retained.

mod diagnostics;
mod dump;

pub use diagnostics::effective_sample_size;
pub use dump::{read_chain_binary, write_chain_binary, write_chain_csv, ChainSidecar};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Dataset, Model, ParameterVector};
use crate::numeric::{batch_means_se, derive_seed};

/// The distribution `∝ exp(−β n L_n(w)) φ(w)` for one model and dataset.
#[derive(Clone, Copy)]
pub struct TemperedTarget<'a> {
    pub model: &'a dyn Model,
    pub data: &'a Dataset,
    pub beta: f64,
}

impl<'a> TemperedTarget<'a> {
    pub fn new(model: &'a dyn Model, data: &'a Dataset, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Config(format!("inverse temperature must be finite and > 0, got {beta}")));
        }
        model.check_data(data)?;
        Ok(TemperedTarget { model, data, beta })
    }

    /// WBIC temperature `1 / log n`.
    pub fn wbic(model: &'a dyn Model, data: &'a Dataset) -> Result<Self> {
        if data.n() < 3 {
            return Err(Error::Config("WBIC needs n >= 3".into()));
        }
        Self::new(model, data, 1.0 / (data.n() as f64).ln())
    }

    /// Returns `(log target, n L_n)`; `log target` is `-inf` outside the support.
    fn evaluate(&self, w: &[f64]) -> (f64, f64) {
        let lp = self.model.log_prior(w);
        if lp == f64::NEG_INFINITY || lp.is_nan() {
            return (f64::NEG_INFINITY, f64::NAN);
        }
        let nll = self.model.total_nll(w, self.data);
        let lt = -self.beta * nll + lp;
        if lt.is_finite() {
            (lt, nll)
        } else {
            (f64::NEG_INFINITY, nll)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainInit {
    PriorDraw,
    /// A prior draw multiplied by `scale`, for priors much wider than the posterior.
    ScaledPriorDraw { scale: f64 },
    Point(ParameterVector),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub thin: usize,
    pub draws: usize,
    pub step_std_init: f64,
    pub target_acceptance: f64,
    pub adapt: bool,
    pub seed: u64,
    pub init: ChainInit,
}

impl Default for ChainConfig {
    /// The published sampler settings: 50 000 burn-in steps, every 100th
    /// state kept until 2000 draws, initial proposal std 0.0012.
    fn default() -> Self {
        ChainConfig {
            burn_in: 50_000,
            thin: 100,
            draws: 2000,
            step_std_init: 0.0012,
            target_acceptance: 0.4,
            adapt: true,
            seed: 0,
            init: ChainInit::PriorDraw,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin < 1 {
            return Err(Error::Config("thin must be >= 1".into()));
        }
        if self.draws < 2 {
            return Err(Error::Config("draws must be >= 2".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::Config("target_acceptance must lie in (0, 1)".into()));
        }
        if !(self.step_std_init > 0.0) || !self.step_std_init.is_finite() {
            return Err(Error::Config("step_std_init must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ChainConfig { seed, ..self.clone() }
    }
}

/// Per-chain sampler diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub seed: u64,
    pub acceptance_rate: f64,
    pub burn_in_acceptance_rate: f64,
    pub step_std_final: f64,
}

/// Retained draws of one (or several pooled) Metropolis chains.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub beta: f64,
    pub n: usize,
    pub dim: usize,
    /// Row-major `R × d`.
    pub draws: Vec<f64>,
    /// `n L_n(w_r)` for each retained draw.
    pub nll: Vec<f64>,
    pub acceptance_rate: f64,
    pub step_std_final: f64,
    pub seed: u64,
    pub model_fingerprint: String,
    pub data_fingerprint: String,
    pub config: ChainConfig,
    pub per_chain: Vec<ChainDiagnostics>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.nll.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nll.is_empty()
    }

    pub fn draw(&self, r: usize) -> &[f64] {
        &self.draws[r * self.dim..(r + 1) * self.dim]
    }

    pub fn iter_draws(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |r| self.draw(r))
    }

    /// Concatenates chains that target the same distribution.
    pub fn pool(chains: Vec<Chain>) -> Result<Chain> {
        let mut iter = chains.into_iter();
        let mut pooled = iter
            .next()
            .ok_or_else(|| Error::Config("cannot pool zero chains".into()))?;
        for c in iter {
            if c.beta != pooled.beta
                || c.dim != pooled.dim
                || c.data_fingerprint != pooled.data_fingerprint
                || c.model_fingerprint != pooled.model_fingerprint
            {
                return Err(Error::Contract("pooled chains must share target".into()));
            }
            pooled.draws.extend(c.draws);
            pooled.nll.extend(c.nll);
            pooled.per_chain.extend(c.per_chain);
        }
        let k = pooled.per_chain.len() as f64;
        pooled.acceptance_rate = pooled.per_chain.iter().map(|d| d.acceptance_rate).sum::<f64>() / k;
        Ok(pooled)
    }
}

/// Runs one random-walk Metropolis chain. Deterministic given `config.seed`.
pub fn run_chain(target: &TemperedTarget<'_>, config: &ChainConfig) -> Result<Chain> {
    config.validate()?;
    let model = target.model;
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut w = match &config.init {
        ChainInit::PriorDraw => model.sample_prior(&mut rng),
        ChainInit::ScaledPriorDraw { scale } => model
            .sample_prior(&mut rng)
            .into_iter()
            .map(|v| v * scale)
            .collect(),
        ChainInit::Point(p) => p.0.clone(),
    };
    if w.len() != d {
        return Err(Error::Init(format!("initial point has length {}, expected {d}", w.len())));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Init("initial point has non-finite entries".into()));
    }
    let (mut lt, mut nll) = target.evaluate(&w);
    if !lt.is_finite() {
        return Err(Error::Init(format!("log target is {lt} at the initial point")));
    }

    let mut log_step = config.step_std_init.ln();
    let mut proposal = vec![0.0; d];

    let mut step = |w: &mut Vec<f64>, lt: &mut f64, nll: &mut f64, step_std: f64, rng: &mut ChaCha8Rng| -> bool {
        for (p, wi) in proposal.iter_mut().zip(w.iter()) {
            let z: f64 = StandardNormal.sample(rng);
            *p = wi + step_std * z;
        }
        let (lt_new, nll_new) = target.evaluate(&proposal);
        let u: f64 = rng.random();
        if lt_new > f64::NEG_INFINITY && u.ln() < lt_new - *lt {
            w.copy_from_slice(&proposal);
            *lt = lt_new;
            *nll = nll_new;
            true
        } else {
            false
        }
    };

    let mut burn_accepts = 0usize;
    for t in 1..=config.burn_in {
        let accepted = step(&mut w, &mut lt, &mut nll, log_step.exp(), &mut rng);
        burn_accepts += accepted as usize;
        if config.adapt {
            let gain = (t as f64).powf(-0.6);
            let indicator = if accepted { 1.0 } else { 0.0 };
            log_step = (log_step + gain * (indicator - config.target_acceptance)).clamp(-40.0, 20.0);
        }
    }
    if config.burn_in > 0 && burn_accepts == 0 {
        return Err(Error::Adaptation { steps: config.burn_in });
    }

    let step_std = log_step.exp();
    let mut draws = Vec::with_capacity(config.draws * d);
    let mut nlls = Vec::with_capacity(config.draws);
    let mut accepts = 0usize;
    for _ in 0..config.draws {
        for _ in 0..config.thin {
            accepts += step(&mut w, &mut lt, &mut nll, step_std, &mut rng) as usize;
        }
        draws.extend_from_slice(&w);
        nlls.push(nll);
    }

    let acceptance_rate = accepts as f64 / (config.draws * config.thin) as f64;
    let burn_in_acceptance_rate = if config.burn_in > 0 {
        burn_accepts as f64 / config.burn_in as f64
    } else {
        f64::NAN
    };
    Ok(Chain {
        beta: target.beta,
        n: target.data.n(),
        dim: d,
        draws,
        nll: nlls,
        acceptance_rate,
        step_std_final: step_std,
        seed: config.seed,
        model_fingerprint: model.fingerprint(),
        data_fingerprint: target.data.fingerprint().to_owned(),
        config: config.clone(),
        per_chain: vec![ChainDiagnostics {
            seed: config.seed,
            acceptance_rate,
            burn_in_acceptance_rate,
            step_std_final: step_std,
        }],
    })
}

/// Runs `count` independent chains with seeds derived from `config.seed` and
/// pools their draws. One chain reuses `config.seed` unchanged.
pub fn run_chains(target: &TemperedTarget<'_>, config: &ChainConfig, count: usize) -> Result<Chain> {
    if count == 0 {
        return Err(Error::Config("need at least one chain".into()));
    }
    if count == 1 {
        return run_chain(target, config);
    }
    let chains = (0..count)
        .into_par_iter()
        .map(|i| run_chain(target, &config.with_seed(derive_seed(config.seed, i as u64))))
        .collect::<Result<Vec<_>>>()?;
    Chain::pool(chains)
}

/// A Monte Carlo mean with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub mcse: f64,
}

/// `E_w^β[g(w)] ≈ (1/R) Σ g(w_r)`.
pub fn posterior_expectation(chain: &Chain, g: impl Fn(&[f64]) -> f64) -> Result<Estimate> {
    if chain.is_empty() {
        return Err(Error::Config("empty chain".into()));
    }
    let values = chain
        .iter_draws()
        .enumerate()
        .map(|(r, w)| {
            let v = g(w);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Numerical(format!("g is {v} at draw {r}")))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(&values))
}

/// Posterior mean of the cached `n L_n` values.
pub fn expected_nll(chain: &Chain) -> Estimate {
    summarize(&chain.nll)
}

pub(crate) fn summarize(values: &[f64]) -> Estimate {
    Estimate {
        mean: crate::numeric::mean(values),
        mcse: batch_means_se(values),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{empirical_log_loss, ConjugateNormalModel, ConjugateTruth, Record};
    use rand::RngCore;

    fn conj_data(d: usize, n: usize, seed: u64) -> Dataset {
        let truth = ConjugateTruth { mean: vec![0.5; d], noise_std: 1.0 };
        truth.sample(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn quick() -> ChainConfig {
        ChainConfig {
            burn_in: 2000,
            thin: 5,
            draws: 4000,
            step_std_init: 0.5,
            ..Default::default()
        }
    }

    /// Log likelihood ignores w.
    struct FlatLikelihood;

    impl Model for FlatLikelihood {
        fn dim(&self) -> usize {
            2
        }
        fn label(&self) -> String {
            "flat".into()
        }
        fn log_likelihood(&self, _w: &[f64], _r: &Record) -> f64 {
            -1.25
        }
        fn log_prior(&self, w: &[f64]) -> f64 {
            crate::models::isotropic_normal_log_density(w, 2.0)
        }
        fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
            (0..2).map(|_| 2.0 * Distribution::<f64>::sample(&StandardNormal, rng)).collect()
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let m = ConjugateNormalModel::new(2, 1.0, 1.0).unwrap();
        let data = conj_data(2, 50, 1);
        let t = TemperedTarget::new(&m, &data, 0.3).unwrap();
        let a = run_chain(&t, &quick()).unwrap();
        let b = run_chain(&t, &quick()).unwrap();
        assert_eq!(a, b);
        let c = run_chain(&t, &quick().with_seed(1)).unwrap();
        assert_ne!(a.nll, c.nll);
    }

    #[test]
    fn conjugate_posterior_moments() {
        let m = ConjugateNormalModel::new(1, 1.0, 2.0).unwrap();
        let data = conj_data(1, 40, 2);
        let beta = 0.5;
        let t = TemperedTarget::new(&m, &data, beta).unwrap();
        let chain = run_chain(&t, &ChainConfig { draws: 20_000, ..quick() }).unwrap();
        let (mu, var) = m.posterior_moments(beta, &data).unwrap()[0];
        let mean = posterior_expectation(&chain, |w| w[0]).unwrap();
        assert!((mean.mean - mu).abs() < 4.0 * mean.mcse, "{mean:?} vs {mu}");
        let second = posterior_expectation(&chain, |w| (w[0] - mu).powi(2)).unwrap();
        assert!((second.mean - var).abs() < 4.0 * second.mcse, "{second:?} vs {var}");
    }

    #[test]
    fn two_dim_posterior_mean() {
        let m = ConjugateNormalModel::new(2, 1.0, 1.0).unwrap();
        let data = conj_data(2, 100, 3);
        let t = TemperedTarget::new(&m, &data, 1.0).unwrap();
        let chain = run_chain(&t, &quick()).unwrap();
        let mu = m.posterior_moments(1.0, &data).unwrap()[0].0;
        let est = posterior_expectation(&chain, |w| w[0]).unwrap();
        assert!((est.mean - mu).abs() < 4.0 * est.mcse);
    }

    #[test]
    fn constant_likelihood_samples_prior() {
        let data = Dataset::plain(vec![vec![0.0]; 10]).unwrap();
        let t = TemperedTarget::new(&FlatLikelihood, &data, 0.7).unwrap();
        let chain = run_chain(&t, &ChainConfig { draws: 20_000, step_std_init: 2.0, ..quick() }).unwrap();
        for k in 0..2 {
            let m = posterior_expectation(&chain, |w| w[k]).unwrap();
            assert!(m.mean.abs() < 4.0 * m.mcse);
            let v = posterior_expectation(&chain, |w| w[k] * w[k]).unwrap();
            assert!((v.mean - 4.0).abs() < 4.0 * v.mcse, "{v:?}");
        }
    }

    #[test]
    fn constant_expectation_has_zero_error() {
        let m = ConjugateNormalModel::new(1, 1.0, 1.0).unwrap();
        let data = conj_data(1, 10, 4);
        let t = TemperedTarget::new(&m, &data, 1.0).unwrap();
        let chain = run_chain(&t, &quick()).unwrap();
        let e = posterior_expectation(&chain, |_| 1.0).unwrap();
        assert_eq!((e.mean, e.mcse), (1.0, 0.0));
        let by_g = posterior_expectation(&chain, |w| m.total_nll(w, &data)).unwrap();
        let cached = expected_nll(&chain);
        assert!((by_g.mean - cached.mean).abs() <= 1e-12 * cached.mean.abs());
        assert!(posterior_expectation(&chain, |_| f64::NAN).is_err());
    }

    #[test]
    fn cached_nll_matches_recomputation() {
        let m = ConjugateNormalModel::new(3, 1.0, 1.0).unwrap();
        let data = conj_data(3, 80, 5);
        let t = TemperedTarget::new(&m, &data, 0.2).unwrap();
        let chain = run_chain(&t, &quick()).unwrap();
        for r in (0..chain.len()).step_by(chain.len() / 10) {
            let want = data.n() as f64 * empirical_log_loss(&m, chain.draw(r), &data).unwrap();
            assert!(((chain.nll[r] - want) / want).abs() < 1e-10);
        }
    }

    #[test]
    fn adaptation_reaches_target_band() {
        let m = ConjugateNormalModel::new(4, 1.0, 1.0).unwrap();
        let data = conj_data(4, 200, 6);
        let t = TemperedTarget::new(&m, &data, 1.0).unwrap();
        let chain = run_chain(&t, &ChainConfig { step_std_init: 5.0, ..quick() }).unwrap();
        assert!((0.3..0.5).contains(&chain.acceptance_rate), "{}", chain.acceptance_rate);
        assert_eq!(chain.per_chain[0].step_std_final, chain.step_std_final);
    }

    #[test]
    fn frozen_step_without_adaptation() {
        let m = ConjugateNormalModel::new(1, 1.0, 1.0).unwrap();
        let data = conj_data(1, 20, 7);
        let t = TemperedTarget::new(&m, &data, 1.0).unwrap();
        let chain = run_chain(&t, &ChainConfig { adapt: false, step_std_init: 0.37, ..quick() }).unwrap();
        assert_eq!(chain.step_std_final, 0.37);
    }

    #[test]
    fn bad_init_and_config_errors() {
        let m = ConjugateNormalModel::new(2, 1.0, 1.0).unwrap();
        let data = conj_data(2, 20, 8);
        let t = TemperedTarget::new(&m, &data, 1.0).unwrap();
        let cfg = ChainConfig { init: ChainInit::Point(vec![0.0].into()), ..quick() };
        assert!(matches!(run_chain(&t, &cfg), Err(Error::Init(_))));
        let cfg = ChainConfig { init: ChainInit::Point(vec![f64::NAN, 0.0].into()), ..quick() };
        assert!(matches!(run_chain(&t, &cfg), Err(Error::Init(_))));
        assert!(run_chain(&t, &ChainConfig { thin: 0, ..quick() }).is_err());
        assert!(run_chain(&t, &ChainConfig { draws: 1, ..quick() }).is_err());
        assert!(TemperedTarget::new(&m, &data, 0.0).is_err());
    }

    #[test]
    fn outside_support_init_fails() {
        let base = ConjugateNormalModel::new(1, 1.0, 1.0).unwrap();
        let m = crate::models::Bounded::new(base, vec![-1.0], vec![1.0]).unwrap();
        let data = conj_data(1, 20, 9);
        let t = TemperedTarget::new(&m, &data, 1.0).unwrap();
        let cfg = ChainConfig { init: ChainInit::Point(vec![3.0].into()), ..quick() };
        assert!(matches!(run_chain(&t, &cfg), Err(Error::Init(_))));
        let chain = run_chain(&t, &quick()).unwrap();
        assert!(chain.draws.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn zero_acceptance_is_adaptation_error() {
        let m = ConjugateNormalModel::new(1, 1.0, 1.0).unwrap();
        let data = conj_data(1, 1000, 10);
        let t = TemperedTarget::new(&m, &data, 1.0).unwrap();
        let cfg = ChainConfig {
            burn_in: 50,
            adapt: false,
            step_std_init: 1e6,
            init: ChainInit::Point(vec![0.5].into()),
            ..quick()
        };
        assert!(matches!(run_chain(&t, &cfg), Err(Error::Adaptation { .. })));
    }

    #[test]
    fn pooled_chains_concatenate() {
        let m = ConjugateNormalModel::new(1, 1.0, 1.0).unwrap();
        let data = conj_data(1, 30, 11);
        let t = TemperedTarget::new(&m, &data, 1.0).unwrap();
        let pooled = run_chains(&t, &quick(), 3).unwrap();
        assert_eq!(pooled.len(), 3 * quick().draws);
        assert_eq!(pooled.per_chain.len(), 3);
        assert_eq!(pooled, run_chains(&t, &quick(), 3).unwrap());
    }
}
