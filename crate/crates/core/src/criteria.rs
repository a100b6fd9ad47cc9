//! Information criteria and model selection.
//!
//! - WBIC: posterior mean of `n L_n` at `β = 1/log n`.
//! - WAIC: `T_n + V_n/n` from an untempered (`β = 1`) posterior sample.
//! - BIC: `n L_n(ŵ) + (d/2) log n`; AIC: `L_n(ŵ) + d/n`, with `ŵ` the MLE.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::{expected_nll, Chain, Estimate};
use crate::models::{empirical_log_loss, Dataset, Model, ParameterVector};
use crate::numeric::{derive_seed, log_mean_exp};
use crate::optimize::{minimize, NelderMeadOptions};

const BETA_TOLERANCE: f64 = 1e-12;
const TIE_TOLERANCE: f64 = 1e-9;

/// WBIC from a chain sampled at `β = 1/log n`.
pub fn wbic(chain: &Chain, n: usize) -> Result<Estimate> {
    if n < 3 {
        return Err(Error::Contract(format!("WBIC needs n >= 3, got {n}")));
    }
    let expected = 1.0 / (n as f64).ln();
    if (chain.beta - expected).abs() > BETA_TOLERANCE {
        return Err(Error::Contract(format!(
            "WBIC chain must target beta = 1/log n = {expected}, chain has {}",
            chain.beta
        )));
    }
    if chain.is_empty() {
        return Err(Error::Config("empty chain".into()));
    }
    Ok(expected_nll(chain))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waic {
    /// Training loss of the Bayes predictive distribution.
    pub t_n: f64,
    /// Functional variance.
    pub v_n: f64,
    pub value: f64,
}

/// WAIC from a chain sampled at `β = 1`.
pub fn waic(chain: &Chain, model: &dyn Model, data: &Dataset) -> Result<Waic> {
    if (chain.beta - 1.0).abs() > BETA_TOLERANCE {
        return Err(Error::Contract(format!(
            "WAIC needs a posterior sample at beta = 1, chain has beta = {}",
            chain.beta
        )));
    }
    if chain.data_fingerprint != data.fingerprint() {
        return Err(Error::Contract("chain was not sampled on this dataset".into()));
    }
    if chain.is_empty() {
        return Err(Error::Config("empty chain".into()));
    }
    let r = chain.len() as f64;
    let per_record: Vec<(f64, f64)> = data
        .records()
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let lls: Vec<f64> = chain.iter_draws().map(|w| model.log_likelihood(w, rec)).collect();
            if lls.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteRecord { index: i });
            }
            // Shifted by the first draw so a constant column gives exactly zero.
            let d: Vec<f64> = lls.iter().map(|v| v - lls[0]).collect();
            let mean = d.iter().sum::<f64>() / r;
            let var = (d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / r).max(0.0);
            Ok((log_mean_exp(&lls), var))
        })
        .collect::<Result<_>>()?;
    let n = data.n() as f64;
    let t_n = -per_record.iter().map(|p| p.0).sum::<f64>() / n;
    let v_n = per_record.iter().map(|p| p.1).sum::<f64>();
    Ok(Waic { t_n, v_n, value: t_n + v_n / n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    Mle,
    Map,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub mode: FitMode,
    pub restarts: usize,
    pub seed: u64,
    /// Start points are prior draws multiplied by this factor.
    pub start_scale: f64,
    pub simplex: NelderMeadOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            mode: FitMode::Mle,
            restarts: 4,
            seed: 0,
            start_scale: 1.0,
            simplex: NelderMeadOptions::default(),
        }
    }
}

/// Multi-start Nelder–Mead minimisation of `L_n` (MLE) or `L_n − log φ / n` (MAP).
pub fn fit_map_or_mle(model: &dyn Model, data: &Dataset, options: &FitOptions) -> Result<ParameterVector> {
    if options.restarts < 1 {
        return Err(Error::Config("restarts must be >= 1".into()));
    }
    model.check_data(data)?;
    let n = data.n() as f64;
    let objective = |w: &[f64]| -> f64 {
        let loss = model.total_nll(w, data) / n;
        match options.mode {
            FitMode::Mle => loss,
            FitMode::Map => loss - model.log_prior(w) / n,
        }
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut last_error = None;
    for k in 0..options.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(options.seed, k as u64));
        let start: Vec<f64> = model
            .sample_prior(&mut rng)
            .into_iter()
            .map(|v| v * options.start_scale)
            .collect();
        match minimize(&objective, &start, &options.simplex) {
            Ok(m) if m.converged && m.value.is_finite() => {
                if best.as_ref().is_none_or(|(v, _)| m.value < *v) {
                    best = Some((m.value, m.x));
                }
            }
            Ok(m) => last_error = Some(format!("start {k} stopped after {} evaluations", m.evaluations)),
            Err(e) => last_error = Some(e.to_string()),
        }
    }
    best.map(|(_, x)| ParameterVector(x)).ok_or_else(|| {
        Error::Optimization(format!(
            "no start converged ({})",
            last_error.unwrap_or_default()
        ))
    })
}

/// `n L_n(ŵ) + (d/2) log n`.
pub fn bic(model: &dyn Model, data: &Dataset, w_hat: &[f64]) -> Result<f64> {
    let n = data.n() as f64;
    Ok(n * empirical_log_loss(model, w_hat, data)? + model.dim() as f64 / 2.0 * n.ln())
}

/// `L_n(ŵ) + d/n`.
pub fn aic(model: &dyn Model, data: &Dataset, w_hat: &[f64]) -> Result<f64> {
    let n = data.n() as f64;
    Ok(empirical_log_loss(model, w_hat, data)? + model.dim() as f64 / n)
}

/// Criteria computed for one candidate model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub label: String,
    pub dim: usize,
    pub n: usize,
    pub wbic: Estimate,
    pub waic: Option<Waic>,
    pub bic: Option<f64>,
    pub aic: Option<f64>,
    /// `WBIC − n S_n`, when the generating density is known.
    pub wbic1: Option<f64>,
    pub model_fingerprint: String,
    pub data_fingerprint: String,
    pub chain_seeds: Vec<u64>,
}

impl CriterionReport {
    /// A report holding only WBIC from `chain`.
    pub fn from_wbic_chain(model: &dyn Model, chain: &Chain) -> Result<Self> {
        let w = wbic(chain, chain.n)?;
        Ok(CriterionReport {
            label: model.label(),
            dim: model.dim(),
            n: chain.n,
            wbic: w,
            waic: None,
            bic: None,
            aic: None,
            wbic1: None,
            model_fingerprint: chain.model_fingerprint.clone(),
            data_fingerprint: chain.data_fingerprint.clone(),
            chain_seeds: chain.per_chain.iter().map(|c| c.seed).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub label: String,
    pub wbic: f64,
    /// `WBIC − n S_n`.
    pub wbic1: Option<f64>,
    /// `WBIC − min WBIC` over the compared reports.
    pub wbic2: f64,
}

/// Baselined WBIC columns; the smallest `wbic2` entry is 0.
pub fn baseline_reports(reports: &[CriterionReport], s_n: Option<f64>) -> Result<Vec<BaselineRow>> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Config("need at least one report".into()))?;
    if reports.iter().any(|r| r.data_fingerprint != first.data_fingerprint) {
        return Err(Error::Contract("reports come from different datasets".into()));
    }
    let min = reports.iter().map(|r| r.wbic.mean).fold(f64::INFINITY, f64::min);
    Ok(reports
        .iter()
        .map(|r| BaselineRow {
            label: r.label.clone(),
            wbic: r.wbic.mean,
            wbic1: s_n.map(|s| r.wbic.mean - r.n as f64 * s),
            wbic2: r.wbic.mean - min,
        })
        .collect())
}

/// Index of the minimum of `(value, dim)` pairs; values within `1e-9` tie and
/// go to the smaller dimension, then the earlier entry.
pub fn argmin_with_tiebreak(values: &[(f64, usize)]) -> Option<usize> {
    let min = values.iter().map(|v| v.0).filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.0 - min <= TIE_TOLERANCE)
        .min_by_key(|(i, v)| (v.1, *i))
        .map(|(i, _)| i)
}

/// The selected candidate: minimum WBIC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub label: String,
}

pub fn select_model(reports: &[CriterionReport]) -> Result<Selection> {
    if reports.len() < 2 {
        return Err(Error::Config("model selection needs at least two reports".into()));
    }
    let values: Vec<(f64, usize)> = reports.iter().map(|r| (r.wbic.mean, r.dim)).collect();
    let index = argmin_with_tiebreak(&values)
        .ok_or_else(|| Error::Numerical("no finite WBIC among reports".into()))?;
    Ok(Selection { index, label: reports[index].label.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::{run_chain, ChainConfig, TemperedTarget};
    use crate::models::{ConjugateNormalModel, ConjugateTruth, Record, ReducedRankModel, RrrTruth};
    use proptest::prelude::*;
    use rand::RngCore;

    fn conj_data(d: usize, n: usize, seed: u64) -> Dataset {
        ConjugateTruth { mean: vec![0.3; d], noise_std: 1.0 }
            .sample(n, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap()
    }

    fn cfg() -> ChainConfig {
        ChainConfig { burn_in: 2000, thin: 5, draws: 2000, step_std_init: 0.3, ..Default::default() }
    }

    /// No parameters: p(x) = N(x; 0, 1).
    struct Fixed;

    impl Model for Fixed {
        fn dim(&self) -> usize {
            0
        }
        fn label(&self) -> String {
            "fixed".into()
        }
        fn log_likelihood(&self, _w: &[f64], r: &Record) -> f64 {
            let Record::Plain(x) = r else { unreachable!() };
            -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * x[0] * x[0]
        }
        fn log_prior(&self, _w: &[f64]) -> f64 {
            0.0
        }
        fn sample_prior(&self, _rng: &mut dyn RngCore) -> Vec<f64> {
            vec![]
        }
    }

    fn report(label: &str, dim: usize, wbic: f64, fp: &str) -> CriterionReport {
        CriterionReport {
            label: label.into(),
            dim,
            n: 100,
            wbic: Estimate { mean: wbic, mcse: 0.1 },
            waic: None,
            bic: None,
            aic: None,
            wbic1: None,
            model_fingerprint: String::new(),
            data_fingerprint: fp.into(),
            chain_seeds: vec![],
        }
    }

    #[test]
    fn zero_parameter_model() {
        let data = conj_data(1, 50, 1);
        let t = TemperedTarget::wbic(&Fixed, &data).unwrap();
        let chain = run_chain(&t, &cfg()).unwrap();
        let w = wbic(&chain, 50).unwrap();
        let nl = 50.0 * empirical_log_loss(&Fixed, &[], &data).unwrap();
        assert!((w.mean - nl).abs() < 1e-9 * nl.abs());
        assert_eq!(w.mcse, 0.0);
        assert!((bic(&Fixed, &data, &[]).unwrap() - nl).abs() < 1e-9);
        assert!((aic(&Fixed, &data, &[]).unwrap() - nl / 50.0).abs() < 1e-12);
    }

    #[test]
    fn wbic_rejects_wrong_temperature() {
        let m = ConjugateNormalModel::new(1, 1.0, 1.0).unwrap();
        let data = conj_data(1, 50, 2);
        let t = TemperedTarget::new(&m, &data, 0.5).unwrap();
        let chain = run_chain(&t, &cfg()).unwrap();
        assert!(matches!(wbic(&chain, 50), Err(Error::Contract(_))));
        assert!(matches!(waic(&chain, &m, &data), Err(Error::Contract(_))));
    }

    #[test]
    fn wbic_matches_closed_form() {
        use crate::models::ClosedFormOracle;
        let m = ConjugateNormalModel::new(1, 1.0, 1.0).unwrap();
        let data = conj_data(1, 1000, 3);
        let t = TemperedTarget::wbic(&m, &data).unwrap();
        let chain = run_chain(&t, &ChainConfig { draws: 5000, ..cfg() }).unwrap();
        let w = wbic(&chain, 1000).unwrap();
        let exact = m.expected_nll(t.beta, &data).unwrap();
        assert!((w.mean - exact).abs() < 4.0 * w.mcse, "{w:?} vs {exact}");
    }

    #[test]
    fn degenerate_chain_waic_is_log_loss() {
        let m = ConjugateNormalModel::new(1, 1.0, 1.0).unwrap();
        let data = conj_data(1, 30, 4);
        let t = TemperedTarget::new(&m, &data, 1.0).unwrap();
        let mut chain = run_chain(&t, &cfg()).unwrap();
        let w0 = chain.draw(0).to_vec();
        for r in 0..chain.len() {
            chain.draws[r] = w0[0];
        }
        let v = waic(&chain, &m, &data).unwrap();
        let l = empirical_log_loss(&m, &w0, &data).unwrap();
        assert_eq!(v.v_n, 0.0);
        assert!((v.t_n - l).abs() < 1e-12);
        assert!((v.value - l).abs() < 1e-12);
    }

    #[test]
    fn waic_bounds() {
        let m = ConjugateNormalModel::new(2, 1.0, 1.0).unwrap();
        let data = conj_data(2, 100, 5);
        let t = TemperedTarget::new(&m, &data, 1.0).unwrap();
        let chain = run_chain(&t, &cfg()).unwrap();
        let v = waic(&chain, &m, &data).unwrap();
        assert!(v.v_n >= 0.0);
        let mean_loss = chain.nll.iter().sum::<f64>() / chain.len() as f64 / 100.0;
        assert!(v.t_n <= mean_loss);
        assert!((v.value - (v.t_n + v.v_n / 100.0)).abs() < 1e-15);
    }

    #[test]
    fn mle_of_conjugate_is_sample_mean() {
        let m = ConjugateNormalModel::new(2, 1.0, 1.0).unwrap();
        let data = conj_data(2, 60, 6);
        let opts = FitOptions { restarts: 2, seed: 9, ..Default::default() };
        let w = fit_map_or_mle(&m, &data, &opts).unwrap();
        let want = m.mle(&data).unwrap();
        for k in 0..2 {
            assert!((w.0[k] - want[k]).abs() < 1e-6, "{:?} vs {want:?}", w.0);
        }
        assert_eq!(w, fit_map_or_mle(&m, &data, &opts).unwrap());
        assert!(fit_map_or_mle(&m, &data, &FitOptions { restarts: 0, ..opts }).is_err());
    }

    #[test]
    fn map_shrinks_toward_prior_mean() {
        let m = ConjugateNormalModel::new(1, 1.0, 0.5).unwrap();
        let data = conj_data(1, 10, 7);
        let opts = FitOptions { mode: FitMode::Map, ..Default::default() };
        let w = fit_map_or_mle(&m, &data, &opts).unwrap();
        let (post_mean, _) = m.posterior_moments(1.0, &data).unwrap()[0];
        assert!((w.0[0] - post_mean).abs() < 1e-6);
    }

    #[test]
    fn rrr_noiseless_fit_interpolates() {
        let truth = RrrTruth {
            a0: vec![vec![0.7, -0.4]],
            b0: vec![vec![0.5], vec![1.2]],
            sigma: 1e-9,
            x_std: 1.0,
        };
        let data = truth.sample(40, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let m = ReducedRankModel::new(2, 2, 1, 0.1, 1.0).unwrap();
        let w = fit_map_or_mle(&m, &data, &FitOptions { restarts: 3, ..Default::default() }).unwrap();
        let c = m.coefficient(&w.0);
        let resid: f64 = data
            .records()
            .iter()
            .map(|r| {
                let Record::Pair { x, y } = r else { unreachable!() };
                (0..2)
                    .map(|i| {
                        let fit = c[i * 2] * x[0] + c[i * 2 + 1] * x[1];
                        (y[i] - fit).powi(2)
                    })
                    .sum::<f64>()
            })
            .sum();
        assert!(resid < 1e-6 * 40.0, "residual {resid}");
    }

    #[test]
    fn bic_penalty_with_log_n_two() {
        // n = e² is not an integer; check the penalty arithmetic at d = 1 directly.
        let m = ConjugateNormalModel::new(1, 1.0, 1.0).unwrap();
        let data = conj_data(1, 7, 9);
        let w = [0.1];
        let n = 7.0f64;
        let nl = n * empirical_log_loss(&m, &w, &data).unwrap();
        let b = bic(&m, &data, &w).unwrap();
        assert!((b - nl - 0.5 * n.ln()).abs() < 1e-12);
        let penalty_at_e2 = 1.0 / 2.0 * std::f64::consts::E.powi(2).ln();
        assert!((penalty_at_e2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn baselines_and_selection() {
        let reports = vec![report("a", 5, 10.0, "x"), report("b", 6, 9.0, "x"), report("c", 7, 9.5, "x")];
        assert_eq!(select_model(&reports).unwrap().index, 1);
        let rows = baseline_reports(&reports, Some(0.01)).unwrap();
        assert_eq!(rows[1].wbic2, 0.0);
        assert_eq!(rows[0].wbic2, 1.0);
        assert_eq!(rows[0].wbic1, Some(10.0 - 1.0));
        let single = baseline_reports(&reports[..1], None).unwrap();
        assert_eq!(single[0].wbic2, 0.0);
        let mixed = vec![report("a", 5, 10.0, "x"), report("b", 6, 9.0, "y")];
        assert!(matches!(baseline_reports(&mixed, None), Err(Error::Contract(_))));
    }

    #[test]
    fn tie_goes_to_smaller_model() {
        let reports = vec![report("big", 7, 3.0, "x"), report("small", 5, 3.0, "x")];
        assert_eq!(select_model(&reports).unwrap().label, "small");
        assert!(select_model(&reports[..1]).is_err());
    }

    #[test]
    fn table_averages_select_true_rank() {
        let wbic2 = [17828.7, 3017.9, 0.0, 6.8, 12.2, 16.6];
        let reports: Vec<_> = wbic2
            .iter()
            .enumerate()
            .map(|(h, v)| report(&format!("H={}", h + 1), 12 * (h + 1), *v, "x"))
            .collect();
        assert_eq!(select_model(&reports).unwrap().label, "H=3");
    }

    proptest! {
        #[test]
        fn selection_is_shift_invariant(values in prop::collection::vec(-1e3f64..1e3, 2..8), shift in -1e4f64..1e4) {
            let reports: Vec<_> = values.iter().enumerate().map(|(i, v)| report("m", i + 1, *v, "x")).collect();
            let shifted: Vec<_> = values.iter().enumerate().map(|(i, v)| report("m", i + 1, v + shift, "x")).collect();
            let a = select_model(&reports).unwrap().index;
            let b = select_model(&shifted).unwrap().index;
            prop_assert_eq!(values[a], values[b]);
            let base = baseline_reports(&reports, None).unwrap();
            let moved = baseline_reports(&shifted, None).unwrap();
            for (x, y) in base.iter().zip(&moved) {
                prop_assert!((x.wbic2 - y.wbic2).abs() < 1e-9 * (1.0 + shift.abs()));
            }
        }
    }
}
