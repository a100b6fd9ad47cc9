//! Real log canonical threshold from tempered expectations of `n L_n`.
//!
//! `E^β[n L_n] ≈ n L_n(w₀) + λ/β`, so two temperatures give
//! `λ̂ = (E^{β₁} − E^{β₂}) / (1/β₁ − 1/β₂)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::free_energy::CurvePoint;
use crate::mcmc::Chain;
use crate::models::TheoryRlct;
use crate::numeric::{batch_means_se, kish_ess_log, mean};

/// Smallest allowed `|β₁ − β₂|`.
pub const BETA_TOLERANCE: f64 = 1e-12;
const MIN_ESS: f64 = 10.0;
const LOW_ESS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RlctMethod {
    Reweight,
    TwoChain,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlctEstimate {
    pub lambda_hat: f64,
    pub std_error: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub method: RlctMethod,
    /// Importance-weight ESS, reweighting only.
    pub ess: Option<f64>,
    /// Estimate of `n L_n(w₀)`, regression only.
    pub intercept: Option<f64>,
    pub theory: Option<TheoryRlct>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Warning>,
}

impl RlctEstimate {
    pub fn with_theory(mut self, theory: Option<TheoryRlct>) -> Self {
        self.theory = theory;
        self
    }
}

fn inverse_gap(beta1: f64, beta2: f64) -> Result<f64> {
    if !(beta1 > 0.0 && beta2 > 0.0) || !beta1.is_finite() || !beta2.is_finite() {
        return Err(Error::Contract(format!("betas must be positive, got {beta1} and {beta2}")));
    }
    if (beta1 - beta2).abs() < BETA_TOLERANCE {
        return Err(Error::Contract(format!("betas {beta1} and {beta2} are not distinct")));
    }
    Ok(1.0 / beta1 - 1.0 / beta2)
}

/// Two-point estimate from independent curve points.
pub fn rlct_two_chain(p1: CurvePoint, p2: CurvePoint) -> Result<RlctEstimate> {
    let gap = inverse_gap(p1.beta, p2.beta)?;
    if !p1.mean.is_finite() || !p2.mean.is_finite() {
        return Err(Error::Numerical("non-finite expectation".into()));
    }
    Ok(RlctEstimate {
        lambda_hat: (p1.mean - p2.mean) / gap,
        std_error: (p1.mcse * p1.mcse + p2.mcse * p2.mcse).sqrt() / gap.abs(),
        beta1: p1.beta,
        beta2: p2.beta,
        method: RlctMethod::TwoChain,
        ess: None,
        intercept: None,
        theory: None,
        warnings: Vec::new(),
    })
}

/// Single-chain estimate: `E^{β₂}[n L_n]` comes from self-normalized
/// reweighting of the `β₁ = chain.beta` draws by `exp(−(β₂ − β₁) n L_n)`.
pub fn rlct_reweighted(chain: &Chain, beta2: f64) -> Result<RlctEstimate> {
    let beta1 = chain.beta;
    let gap = inverse_gap(beta1, beta2)?;
    if chain.len() < 2 {
        return Err(Error::Config("chain needs at least two draws".into()));
    }
    let nll = &chain.nll;
    if nll.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite n L_n in chain".into()));
    }
    let db = beta2 - beta1;
    let log_w: Vec<f64> = nll.iter().map(|v| -db * v).collect();
    let ess = kish_ess_log(&log_w);
    if ess < MIN_ESS {
        return Err(Error::DegenerateWeights { ess });
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
    let w_mean = mean(&w);
    let e1 = mean(nll);
    let e2 = w.iter().zip(nll).map(|(wi, v)| wi * v).sum::<f64>() / (w_mean * w.len() as f64);

    // Per-draw influence of (E1 − E2); its batch-means error covers autocorrelation.
    let influence: Vec<f64> = w
        .iter()
        .zip(nll)
        .map(|(wi, v)| (v - e1) - wi / w_mean * (v - e2))
        .collect();
    let mut warnings = Vec::new();
    if ess < LOW_ESS {
        warnings.push(Warning::LowEss { ess });
    }
    Ok(RlctEstimate {
        lambda_hat: (e1 - e2) / gap,
        std_error: batch_means_se(&influence) / gap.abs(),
        beta1,
        beta2,
        method: RlctMethod::Reweight,
        ess: Some(ess),
        intercept: None,
        theory: None,
        warnings,
    })
}

/// Least-squares fit of `E^β[n L_n] = a + λ/β`. Weighted by `1/mcse²` when
/// every point has a positive mcse, unweighted otherwise. Two points give
/// the two-chain answer.
pub fn rlct_regression(curve: &[CurvePoint]) -> Result<RlctEstimate> {
    if curve.len() < 2 {
        return Err(Error::Config("regression needs at least two points".into()));
    }
    if curve.len() == 2 {
        let two = rlct_two_chain(curve[0], curve[1])?;
        let intercept = curve[0].mean - two.lambda_hat / curve[0].beta;
        return Ok(RlctEstimate { method: RlctMethod::Regression, intercept: Some(intercept), ..two });
    }
    let mut betas: Vec<f64> = curve.iter().map(|p| p.beta).collect();
    betas.sort_by(f64::total_cmp);
    if betas.windows(2).any(|b| b[1] - b[0] < BETA_TOLERANCE) || betas[0] <= 0.0 {
        return Err(Error::Contract("regression needs distinct positive betas".into()));
    }
    if curve.iter().any(|p| !p.mean.is_finite() || !(p.mcse >= 0.0)) {
        return Err(Error::Numerical("non-finite curve point".into()));
    }
    let weighted = curve.iter().all(|p| p.mcse > 0.0);
    let wt = |p: &CurvePoint| if weighted { 1.0 / (p.mcse * p.mcse) } else { 1.0 };
    let sw: f64 = curve.iter().map(wt).sum();
    let xbar = curve.iter().map(|p| wt(p) / p.beta).sum::<f64>() / sw;
    let ybar = curve.iter().map(|p| wt(p) * p.mean).sum::<f64>() / sw;
    let sxx: f64 = curve.iter().map(|p| wt(p) * (1.0 / p.beta - xbar).powi(2)).sum();
    let sxy: f64 = curve.iter().map(|p| wt(p) * (1.0 / p.beta - xbar) * (p.mean - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let std_error = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let rss: f64 = curve.iter().map(|p| (p.mean - intercept - slope / p.beta).powi(2)).sum();
        (rss / (curve.len() - 2) as f64 / sxx).sqrt()
    };
    Ok(RlctEstimate {
        lambda_hat: slope,
        std_error,
        beta1: betas[0],
        beta2: *betas.last().unwrap(),
        method: RlctMethod::Regression,
        ess: None,
        intercept: Some(intercept),
        theory: None,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free_energy::{ClosedFormSource, ExpectationSource};
    use crate::mcmc::{run_chain, ChainConfig, TemperedTarget};
    use crate::models::{ClosedFormOracle, ConjugateNormalModel, ConjugateTruth, Dataset};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(beta: f64, mean: f64, mcse: f64) -> CurvePoint {
        CurvePoint { beta, mean, mcse }
    }

    fn conj(d: usize, n: usize, seed: u64) -> (ConjugateNormalModel, Dataset) {
        let m = ConjugateNormalModel::new(d, 1.0, 1.0).unwrap();
        let data = ConjugateTruth { mean: vec![0.3; d], noise_std: 1.0 }
            .sample(n, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap();
        (m, data)
    }

    fn closed_curve(m: &ConjugateNormalModel, data: &Dataset, betas: &[f64]) -> Vec<CurvePoint> {
        betas.iter().map(|&b| pt(b, m.expected_nll(b, data).unwrap(), 0.0)).collect()
    }

    #[test]
    fn equal_betas_rejected() {
        assert!(matches!(rlct_two_chain(pt(0.2, 1.0, 0.0), pt(0.2, 0.5, 0.0)), Err(Error::Contract(_))));
        assert!(matches!(rlct_two_chain(pt(0.2, 1.0, 0.0), pt(0.2 + 1e-15, 0.5, 0.0)), Err(Error::Contract(_))));
    }

    #[test]
    fn exact_curve_all_methods() {
        let (a, lambda) = (120.0, 13.5);
        let f = |b: f64| a + lambda / b;
        let two = rlct_two_chain(pt(0.1, f(0.1), 0.0), pt(0.15, f(0.15), 0.0)).unwrap();
        assert!((two.lambda_hat - lambda).abs() < 1e-9);
        let curve: Vec<_> = [0.05, 0.1, 0.2, 0.4].iter().map(|&b| pt(b, f(b), 0.0)).collect();
        let reg = rlct_regression(&curve).unwrap();
        assert!((reg.lambda_hat - lambda).abs() < 1e-10);
        assert!((reg.intercept.unwrap() - a).abs() < 1e-9);
        assert!(reg.std_error < 1e-9);
    }

    #[test]
    fn two_point_regression_is_two_chain() {
        let c = [pt(0.1, 50.0, 0.3), pt(0.2, 20.0, 0.4)];
        let reg = rlct_regression(&c).unwrap();
        let two = rlct_two_chain(c[0], c[1]).unwrap();
        assert_eq!(reg.lambda_hat, two.lambda_hat);
        assert_eq!(reg.std_error, two.std_error);
    }

    #[test]
    fn regular_model_closed_form() {
        for d in [1, 2, 4] {
            let mut prev = f64::INFINITY;
            for n in [1000, 10_000] {
                let (m, data) = conj(d, n, d as u64);
                let ln = (n as f64).ln();
                let c = closed_curve(&m, &data, &[1.0 / ln, 1.5 / ln]);
                let est = rlct_two_chain(c[0], c[1]).unwrap();
                let err = (est.lambda_hat - d as f64 / 2.0).abs();
                assert!(err < 0.1 * d as f64, "d={d} n={n} {}", est.lambda_hat);
                assert!(err < prev + 1e-3);
                prev = err;
            }
        }
    }

    #[test]
    fn regression_closed_form_d4() {
        let (m, data) = conj(4, 10_000, 9);
        let ln = (10_000f64).ln();
        let betas: Vec<f64> = [0.5, 1.0, 1.5, 2.0].iter().map(|k| k / ln).collect();
        let est = rlct_regression(&closed_curve(&m, &data, &betas)).unwrap();
        assert!((1.8..=2.2).contains(&est.lambda_hat), "{}", est.lambda_hat);
    }

    fn chain_at(m: &ConjugateNormalModel, data: &Dataset, beta: f64, seed: u64) -> Chain {
        let t = TemperedTarget::new(m, data, beta).unwrap();
        let cfg = ChainConfig { burn_in: 2000, thin: 5, draws: 2000, step_std_init: 0.1, seed, ..Default::default() };
        run_chain(&t, &cfg).unwrap()
    }

    #[test]
    fn reweighted_agrees_with_two_chain() {
        let (m, data) = conj(2, 1000, 11);
        let ln = (1000f64).ln();
        let c1 = chain_at(&m, &data, 1.0 / ln, 1);
        let c2 = chain_at(&m, &data, 1.5 / ln, 2);
        let rw = rlct_reweighted(&c1, 1.5 / ln).unwrap();
        let p = |c: &Chain| {
            let e = crate::mcmc::expected_nll(c);
            pt(c.beta, e.mean, e.mcse)
        };
        let two = rlct_two_chain(p(&c1), p(&c2)).unwrap();
        let tol = 3.0 * (rw.std_error.powi(2) + two.std_error.powi(2)).sqrt();
        assert!((rw.lambda_hat - two.lambda_hat).abs() < tol, "{rw:?} {two:?}");
        assert!(rw.ess.unwrap() > LOW_ESS);
        assert!(rw.warnings.is_empty());
        assert!(matches!(rlct_reweighted(&c1, c1.beta + 1e-15), Err(Error::Contract(_))));
    }

    #[test]
    fn reweighted_degenerate_weights() {
        let (m, data) = conj(2, 1000, 12);
        let c = chain_at(&m, &data, 0.01, 3);
        assert!(matches!(rlct_reweighted(&c, 50.0), Err(Error::DegenerateWeights { .. })));
    }

    #[test]
    fn reweighted_shift_invariant() {
        let (m, data) = conj(2, 1000, 13);
        let mut c = chain_at(&m, &data, 0.2, 4);
        let base = rlct_reweighted(&c, 0.3).unwrap();
        for v in c.nll.iter_mut() {
            *v += 1234.5;
        }
        let shifted = rlct_reweighted(&c, 0.3).unwrap();
        assert!((base.lambda_hat - shifted.lambda_hat).abs() < 1e-9);
    }

    #[test]
    fn closed_source_matches_oracle() {
        let (m, data) = conj(1, 50, 14);
        let src = ClosedFormSource::for_model(&m, &data).unwrap();
        assert_eq!(src.expected_nll_at(0.5).unwrap().mean, m.expected_nll(0.5, &data).unwrap());
    }

    proptest! {
        #[test]
        fn constant_shift_leaves_lambda(
            a in -1e3f64..1e3, lambda in 0.1f64..30.0, c in -1e4f64..1e4,
            b1 in 0.05f64..0.5, k in 1.2f64..3.0,
        ) {
            let b2 = b1 * k;
            let f = |b: f64| a + lambda / b;
            let base = rlct_two_chain(pt(b1, f(b1), 0.1), pt(b2, f(b2), 0.2)).unwrap();
            let moved = rlct_two_chain(pt(b1, f(b1) + c, 0.1), pt(b2, f(b2) + c, 0.2)).unwrap();
            prop_assert!((base.lambda_hat - moved.lambda_hat).abs() <= 1e-9 * (1.0 + lambda + c.abs()));
            prop_assert!((base.lambda_hat - lambda).abs() <= 1e-9 * (1.0 + a.abs() + lambda));
            let curve: Vec<_> = [b1, b2, b2 * 1.5].iter().map(|&b| pt(b, f(b) + c, 0.1)).collect();
            let reg = rlct_regression(&curve).unwrap();
            prop_assert!((reg.lambda_hat - lambda).abs() <= 1e-8 * (1.0 + a.abs() + c.abs() + lambda));
        }
    }
}
