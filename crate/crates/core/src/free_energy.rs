//! Free energy by stepping-stone integration over a temperature ladder, and
//! the optimal inverse temperature `β*` at which `E^β[n L_n] = F`.
//!
//! With `0 = β₀ < β₁ < … < β_J = 1`,
//! `F = −Σⱼ log E^{β_{j−1}}[exp(−n (βⱼ − β_{j−1}) L_n(w))]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::{run_chain, summarize, ChainConfig, Estimate, TemperedTarget};
use crate::models::{ClosedFormOracle, Dataset, Model};
use crate::numeric::{batch_means_se, derive_seed, kish_ess_log, log_mean_exp};

const MIN_RUNG_ESS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TemperatureSchedule {
    betas: Vec<f64>,
}

impl TemperatureSchedule {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.len() < 2 {
            return Err(Error::Config("schedule needs at least two temperatures".into()));
        }
        if betas[0] != 0.0 || *betas.last().unwrap() != 1.0 {
            return Err(Error::Config("schedule must start at 0 and end at 1".into()));
        }
        if betas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("schedule must be strictly increasing".into()));
        }
        Ok(TemperatureSchedule { betas })
    }

    /// `βⱼ = (j/J)^exponent`, `j = 0..=J`.
    pub fn power(rungs: usize, exponent: f64) -> Result<Self> {
        if rungs == 0 || !(exponent > 0.0) {
            return Err(Error::Config("power schedule needs J >= 1 and a positive exponent".into()));
        }
        let j = rungs as f64;
        Self::new((0..=rungs).map(|i| (i as f64 / j).powf(exponent)).collect())
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn rungs(&self) -> usize {
        self.betas.len() - 1
    }
}

impl Default for TemperatureSchedule {
    /// Twenty rungs on a fifth-power ladder.
    fn default() -> Self {
        Self::power(20, 5.0).expect("valid default")
    }
}

impl TryFrom<Vec<f64>> for TemperatureSchedule {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TemperatureSchedule> for Vec<f64> {
    fn from(s: TemperatureSchedule) -> Self {
        s.betas
    }
}

/// `log E^{from}[exp(−(to − from) n L_n)]` for one rung.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RungTerm {
    pub log_ratio: f64,
    pub mcse: f64,
    pub ess: f64,
    pub seed: u64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    /// `−Σ terms`.
    pub value: f64,
    pub mcse: f64,
    pub terms: Vec<f64>,
    pub term_mcse: Vec<f64>,
    pub ess: Vec<f64>,
    pub seeds: Vec<u64>,
    pub schedule: TemperatureSchedule,
    pub total_steps: usize,
}

/// Assembles the estimate from per-rung terms supplied by `rung(j, β_{j−1}, βⱼ)`.
pub fn stepping_stone_with<F>(schedule: &TemperatureSchedule, rung: F) -> Result<FreeEnergyEstimate>
where
    F: Fn(usize, f64, f64) -> Result<RungTerm> + Sync,
{
    let b = schedule.betas();
    let terms: Vec<RungTerm> = (1..b.len())
        .into_par_iter()
        .map(|j| rung(j, b[j - 1], b[j]))
        .collect::<Result<_>>()?;
    for (j, t) in terms.iter().enumerate() {
        if t.ess < MIN_RUNG_ESS {
            return Err(Error::DegenerateRung {
                rung: j + 1,
                beta_from: b[j],
                beta_to: b[j + 1],
                ess: t.ess,
            });
        }
    }
    let value = -terms.iter().map(|t| t.log_ratio).sum::<f64>();
    let mcse = terms.iter().map(|t| t.mcse * t.mcse).sum::<f64>().sqrt();
    Ok(FreeEnergyEstimate {
        value,
        mcse,
        terms: terms.iter().map(|t| t.log_ratio).collect(),
        term_mcse: terms.iter().map(|t| t.mcse).collect(),
        ess: terms.iter().map(|t| t.ess).collect(),
        seeds: terms.iter().map(|t| t.seed).collect(),
        schedule: schedule.clone(),
        total_steps: terms.iter().map(|t| t.steps).sum(),
    })
}

/// Log-mean-exp of `−Δβ·nll` with its delta-method standard error.
fn rung_from_nll(nll: &[f64], delta_beta: f64, seed: u64, steps: usize) -> Result<RungTerm> {
    if nll.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("NaN log loss in rung sample".into()));
    }
    let log_w: Vec<f64> = nll.iter().map(|v| -delta_beta * v).collect();
    let log_ratio = log_mean_exp(&log_w);
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let mcse = batch_means_se(&scaled) / mean;
    Ok(RungTerm {
        log_ratio,
        mcse,
        ess: kish_ess_log(&log_w),
        seed,
        steps,
    })
}

/// Stepping-stone free energy. The `β = 0` rung samples the prior directly;
/// every other rung runs a chain at `β_{j−1}` seeded from `(config.seed, j)`.
pub fn stepping_stone(
    model: &dyn Model,
    data: &Dataset,
    schedule: &TemperatureSchedule,
    config: &ChainConfig,
) -> Result<FreeEnergyEstimate> {
    config.validate()?;
    model.check_data(data)?;
    stepping_stone_with(schedule, |j, from, to| {
        let seed = derive_seed(config.seed, j as u64);
        let delta = to - from;
        if from == 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nll: Vec<f64> = (0..config.draws)
                .map(|_| {
                    let w = model.sample_prior(&mut rng);
                    model.total_nll(&w, data)
                })
                .collect();
            rung_from_nll(&nll, delta, seed, config.draws)
        } else {
            let target = TemperedTarget::new(model, data, from)?;
            let chain = run_chain(&target, &config.with_seed(seed))?;
            rung_from_nll(&chain.nll, delta, seed, config.burn_in + config.thin * config.draws)
        }
    })
}

/// `(β, E^β[n L_n], mcse)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub beta: f64,
    pub mean: f64,
    pub mcse: f64,
}

/// Anything that can report `E^β[n L_n]` at a requested `β`.
pub trait ExpectationSource: Sync {
    fn expected_nll_at(&self, beta: f64) -> Result<Estimate>;

    /// Sample size `n`.
    fn n(&self) -> usize;
}

/// One fresh chain per requested `β`, seeded from `(config.seed, β)` so the
/// same temperature always reuses the same stream.
pub struct ChainSource<'a> {
    pub model: &'a dyn Model,
    pub data: &'a Dataset,
    pub config: ChainConfig,
}

impl ExpectationSource for ChainSource<'_> {
    fn expected_nll_at(&self, beta: f64) -> Result<Estimate> {
        let target = TemperedTarget::new(self.model, self.data, beta)?;
        let seed = derive_seed(self.config.seed, beta.to_bits());
        let chain = run_chain(&target, &self.config.with_seed(seed))?;
        Ok(summarize(&chain.nll))
    }

    fn n(&self) -> usize {
        self.data.n()
    }
}

/// Exact expectations from a closed-form oracle (zero standard error).
pub struct ClosedFormSource<'a> {
    pub oracle: &'a dyn ClosedFormOracle,
    pub data: &'a Dataset,
}

impl<'a> ClosedFormSource<'a> {
    pub fn for_model(model: &'a dyn Model, data: &'a Dataset) -> Result<Self> {
        let oracle = model
            .oracle()
            .ok_or_else(|| Error::Unavailable(format!("{} has no closed form", model.label())))?;
        Ok(ClosedFormSource { oracle, data })
    }

    /// `F = −log Z(1)`.
    pub fn free_energy(&self) -> Result<f64> {
        Ok(-self.oracle.log_partition(1.0, self.data)?)
    }
}

impl ExpectationSource for ClosedFormSource<'_> {
    fn expected_nll_at(&self, beta: f64) -> Result<Estimate> {
        Ok(Estimate { mean: self.oracle.expected_nll(beta, self.data)?, mcse: 0.0 })
    }

    fn n(&self) -> usize {
        self.data.n()
    }
}

/// `E^β[n L_n]` at each of `betas` (positive, strictly increasing).
pub fn expected_nll_curve_with(source: &dyn ExpectationSource, betas: &[f64]) -> Result<Vec<CurvePoint>> {
    if betas.is_empty() || betas[0] <= 0.0 || betas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("betas must be positive and strictly increasing".into()));
    }
    betas
        .par_iter()
        .map(|&beta| {
            let e = source.expected_nll_at(beta)?;
            Ok(CurvePoint { beta, mean: e.mean, mcse: e.mcse })
        })
        .collect()
}

pub fn expected_nll_curve(
    model: &dyn Model,
    data: &Dataset,
    betas: &[f64],
    config: &ChainConfig,
) -> Result<Vec<CurvePoint>> {
    config.validate()?;
    let source = ChainSource { model, data, config: config.clone() };
    expected_nll_curve_with(&source, betas)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalBeta {
    pub beta_star: f64,
    /// Tends to 1 as `n` grows.
    pub beta_star_times_log_n: f64,
    /// Final bracket containing the root.
    pub interval: (f64, f64),
    /// The root sits at the upper bracket end.
    pub boundary: bool,
    pub evaluations: usize,
}

/// Bisection for `E^β[n L_n] = f_hat` on `bracket`, using that the left side
/// decreases in `β`. Stops when the bracket is narrower than `tol` or the
/// residual at the midpoint is within twice its standard error of zero.
pub fn optimal_beta_with(
    source: &dyn ExpectationSource,
    f_hat: f64,
    bracket: (f64, f64),
    tol: f64,
) -> Result<OptimalBeta> {
    let (mut lo, mut hi) = bracket;
    if !(tol > 0.0) || !(lo > 0.0 && lo < hi && hi <= 1.0) {
        return Err(Error::Config("need tol > 0 and 0 < lo < hi <= 1".into()));
    }
    let log_n = (source.n() as f64).ln();
    let e_lo = source.expected_nll_at(lo)?;
    let e_hi = source.expected_nll_at(hi)?;
    let mut evaluations = 2;
    let scale = 1.0 + e_lo.mean.abs().max(e_hi.mean.abs());
    if (e_lo.mean - e_hi.mean).abs() <= 1e-12 * scale && e_lo.mcse == 0.0 && e_hi.mcse == 0.0 {
        return Err(Error::DegenerateModel);
    }
    let g_hi = e_hi.mean - f_hat;
    if g_hi.abs() <= 2.0 * e_hi.mcse {
        return Ok(OptimalBeta {
            beta_star: hi,
            beta_star_times_log_n: hi * log_n,
            interval: (hi, hi),
            boundary: true,
            evaluations,
        });
    }
    let g_lo = e_lo.mean - f_hat;
    if g_hi > 0.0 || g_lo < 0.0 {
        return Err(Error::Bracket(format!(
            "E[nL_n] - F is {g_lo} at beta {lo} and {g_hi} at beta {hi}; no sign change"
        )));
    }
    let mut mid = 0.5 * (lo + hi);
    while hi - lo >= tol {
        mid = 0.5 * (lo + hi);
        let e = source.expected_nll_at(mid)?;
        evaluations += 1;
        let g = e.mean - f_hat;
        if g.abs() <= 2.0 * e.mcse {
            break;
        }
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
    }
    Ok(OptimalBeta {
        beta_star: mid,
        beta_star_times_log_n: mid * log_n,
        interval: (lo, hi),
        boundary: false,
        evaluations,
    })
}

/// [`optimal_beta_with`] on fresh chains over the bracket `(1e-4, 1)`.
pub fn optimal_beta(
    model: &dyn Model,
    data: &Dataset,
    f_hat: f64,
    config: &ChainConfig,
    tol: f64,
) -> Result<OptimalBeta> {
    config.validate()?;
    let source = ChainSource { model, data, config: config.clone() };
    optimal_beta_with(&source, f_hat, (1e-4, 1.0), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ConjugateNormalModel, ConjugateTruth, Record};
    use rand::RngCore;

    fn conj(d: usize, n: usize, seed: u64) -> (ConjugateNormalModel, Dataset) {
        let m = ConjugateNormalModel::new(d, 1.0, 1.0).unwrap();
        let data = ConjugateTruth { mean: vec![0.5; d], noise_std: 1.0 }
            .sample(n, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap();
        (m, data)
    }

    fn cfg() -> ChainConfig {
        ChainConfig { burn_in: 2000, thin: 5, draws: 2000, step_std_init: 0.3, ..Default::default() }
    }

    struct ConstantLoss;

    impl Model for ConstantLoss {
        fn dim(&self) -> usize {
            1
        }
        fn label(&self) -> String {
            "constant".into()
        }
        fn log_likelihood(&self, _w: &[f64], _r: &Record) -> f64 {
            -0.75
        }
        fn log_prior(&self, w: &[f64]) -> f64 {
            crate::models::isotropic_normal_log_density(w, 1.0)
        }
        fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
            vec![rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng)]
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(TemperatureSchedule::new(vec![0.0, 1.0]).is_ok());
        assert!(TemperatureSchedule::new(vec![0.1, 1.0]).is_err());
        assert!(TemperatureSchedule::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TemperatureSchedule::new(vec![0.0]).is_err());
        let s = TemperatureSchedule::default();
        assert_eq!(s.rungs(), 20);
        assert_eq!(s.betas()[1], (0.05f64).powf(5.0));
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<TemperatureSchedule>(&json).unwrap(), s);
        assert!(serde_json::from_str::<TemperatureSchedule>("[0.5, 1.0]").is_err());
    }

    #[test]
    fn single_rung_is_prior_sampling_estimate() {
        let (m, data) = conj(1, 10, 1);
        let schedule = TemperatureSchedule::new(vec![0.0, 1.0]).unwrap();
        let est = stepping_stone(&m, &data, &schedule, &cfg()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg().seed, 1));
        let lw: Vec<f64> = (0..cfg().draws)
            .map(|_| -m.total_nll(&m.sample_prior(&mut rng), &data))
            .collect();
        assert!((est.value + log_mean_exp(&lw)).abs() < 1e-12);
        assert_eq!(est.terms.len(), 1);
    }

    #[test]
    fn constant_loss_is_exact() {
        let data = Dataset::plain(vec![vec![0.0]; 40]).unwrap();
        let est = stepping_stone(&ConstantLoss, &data, &TemperatureSchedule::power(5, 5.0).unwrap(), &cfg()).unwrap();
        let nc = 40.0 * 0.75;
        assert!((est.value - nc).abs() < 1e-12, "{}", est.value);
        assert_eq!(est.mcse, 0.0);
    }

    #[test]
    fn conjugate_free_energy() {
        let (m, data) = conj(1, 100, 2);
        let est = stepping_stone(&m, &data, &TemperatureSchedule::default(), &cfg()).unwrap();
        let exact = -m.log_partition(1.0, &data).unwrap();
        assert!((est.value - exact).abs() <= 4.0 * est.mcse, "{} vs {exact} ± {}", est.value, est.mcse);
        assert_eq!(est, stepping_stone(&m, &data, &TemperatureSchedule::default(), &cfg()).unwrap());
    }

    #[test]
    fn closed_form_rungs_telescope() {
        let (m, data) = conj(2, 300, 7);
        let est = stepping_stone_with(&TemperatureSchedule::default(), |j, from, to| {
            let log_ratio = m.log_partition(to, &data)? - m.log_partition(from, &data)?;
            Ok(RungTerm { log_ratio, mcse: 0.0, ess: 1e6, seed: j as u64, steps: 0 })
        })
        .unwrap();
        let exact = -m.log_partition(1.0, &data).unwrap();
        assert!((est.value - exact).abs() < 1e-10, "{} vs {exact}", est.value);
    }

    #[test]
    fn coarse_schedule_is_degenerate() {
        let (m, data) = conj(2, 2000, 3);
        let schedule = TemperatureSchedule::new(vec![0.0, 1.0]).unwrap();
        let err = stepping_stone(&m, &data, &schedule, &cfg()).unwrap_err();
        assert!(matches!(err, Error::DegenerateRung { rung: 1, .. }), "{err}");
    }

    #[test]
    fn curve_matches_closed_form() {
        let (m, data) = conj(2, 200, 4);
        let betas = [0.1, 0.3, 1.0];
        let curve = expected_nll_curve(&m, &data, &betas, &cfg()).unwrap();
        for p in &curve {
            let exact = m.expected_nll(p.beta, &data).unwrap();
            assert!((p.mean - exact).abs() < 4.0 * p.mcse, "{p:?} vs {exact}");
        }
        for w in curve.windows(2) {
            assert!(w[1].mean <= w[0].mean + 2.0 * (w[0].mcse + w[1].mcse));
        }
        assert!(expected_nll_curve(&m, &data, &[0.5, 0.2], &cfg()).is_err());
    }

    #[test]
    fn optimal_beta_closed_form() {
        let (m, data) = conj(1, 1000, 5);
        let src = ClosedFormSource::for_model(&m, &data).unwrap();
        let f = src.free_energy().unwrap();
        let b = optimal_beta_with(&src, f, (1e-4, 1.0), 1e-10).unwrap();
        assert!((0.9..=1.1).contains(&b.beta_star_times_log_n), "{b:?}");
        let e = m.expected_nll(b.beta_star, &data).unwrap();
        assert!((e - f).abs() < 1e-4);
        let other = optimal_beta_with(&src, f, (1e-3, 0.9), 1e-10).unwrap();
        assert!((other.beta_star - b.beta_star).abs() < 1e-9);
    }

    #[test]
    fn optimal_beta_boundary() {
        let (m, data) = conj(1, 100, 6);
        let src = ClosedFormSource::for_model(&m, &data).unwrap();
        let f = m.expected_nll(1.0, &data).unwrap();
        let b = optimal_beta_with(&src, f, (1e-4, 1.0), 1e-8).unwrap();
        assert!(b.boundary);
        assert_eq!(b.beta_star, 1.0);
        assert!(matches!(optimal_beta_with(&src, f - 100.0, (1e-4, 1.0), 1e-8), Err(Error::Bracket(_))));
    }

    #[test]
    fn optimal_beta_degenerate_model() {
        let data = Dataset::plain(vec![vec![0.0]; 20]).unwrap();
        let err = optimal_beta(&ConstantLoss, &data, 15.0, &cfg(), 1e-3).unwrap_err();
        assert!(matches!(err, Error::DegenerateModel));
    }
}
