//! Runs an [`ExperimentPlan`] over its (repeat × candidate) grid.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::plan::{Candidate, Estimator, ExperimentPlan, TruthConfig, TruthMode};
use super::report::{CandidateInfo, Cell, CellTiming, ExperimentReport, Failure, Provenance};
use crate::criteria::{aic, bic, fit_map_or_mle, waic, FitMode, FitOptions};
use crate::error::{Error, Result};
use crate::free_energy::{stepping_stone, TemperatureSchedule};
use crate::mcmc::{expected_nll, run_chains, Chain, ChainConfig, TemperedTarget};
use crate::models::{empirical_entropy, ConjugateTruth, Dataset, Model, RrrTruth, TrueDensity};
use crate::numeric::derive_seed;
use crate::rlct::{rlct_regression, rlct_reweighted, rlct_two_chain, RlctMethod};
use crate::free_energy::CurvePoint;

const STREAM_TRUTH: u64 = 0;
const STREAM_DATA: u64 = 1;
const STREAM_CELL: u64 = 2;

/// A generated dataset together with the density that produced it.
pub enum Truth {
    Rrr(RrrTruth),
    Conjugate(ConjugateTruth),
}

impl Truth {
    pub fn density(&self) -> &dyn TrueDensity {
        match self {
            Truth::Rrr(t) => t,
            Truth::Conjugate(t) => t,
        }
    }
}

/// Seeds used for repeat `repeat`: (truth, data).
pub fn repeat_seeds(plan: &ExperimentPlan, repeat: usize) -> (u64, u64) {
    let data = derive_seed(derive_seed(plan.seed, STREAM_DATA), repeat as u64);
    let truth = match plan.truth_mode {
        TruthMode::Fixed => derive_seed(plan.seed, STREAM_TRUTH),
        TruthMode::Redraw => derive_seed(data, STREAM_TRUTH),
    };
    (truth, data)
}

/// Seed owned by one cell; chains and fits inside derive from it.
pub fn cell_seed(plan: &ExperimentPlan, repeat: usize, candidate: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(plan.seed, STREAM_CELL), repeat as u64), candidate as u64)
}

/// The dataset for `repeat`, independent of every other repeat.
pub fn generate_repeat(plan: &ExperimentPlan, repeat: usize) -> Result<(Dataset, Truth)> {
    let (truth_seed, data_seed) = repeat_seeds(plan, repeat);
    let mut data_rng = ChaCha8Rng::seed_from_u64(data_seed);
    match &plan.truth {
        TruthConfig::Rrr { .. } => {
            let cfg = plan.truth.rrr_data_config(plan.n).expect("rrr truth");
            let truth = RrrTruth::draw(&cfg, &mut ChaCha8Rng::seed_from_u64(truth_seed))?;
            let data = truth.sample(plan.n, &mut data_rng)?;
            Ok((data, Truth::Rrr(truth)))
        }
        TruthConfig::Conjugate { dim, noise_std, mean } => {
            let truth = ConjugateTruth { mean: vec![*mean; *dim], noise_std: *noise_std };
            let data = truth.sample(plan.n, &mut data_rng)?;
            Ok((data, Truth::Conjugate(truth)))
        }
    }
}

fn candidate_label(c: &Candidate) -> String {
    match c {
        Candidate::Rank { rank, prior_std } if *prior_std == 10.0 => format!("H={rank}"),
        Candidate::Rank { rank, prior_std } => format!("H={rank},prior_std={prior_std}"),
        Candidate::Conjugate { prior_std } => format!("prior_std={prior_std}"),
    }
}

struct CellOutput {
    values: BTreeMap<String, Option<f64>>,
    failures: Vec<(String, String)>,
    seconds: BTreeMap<String, f64>,
}

impl CellOutput {
    fn record<T>(&mut self, name: &str, keys: &[&str], started: Instant, result: Result<T>, put: impl FnOnce(&mut Self, T)) {
        self.seconds.insert(name.to_string(), started.elapsed().as_secs_f64());
        match result {
            Ok(v) => put(self, v),
            Err(e) => {
                for k in keys {
                    self.values.insert(k.to_string(), None);
                }
                self.failures.push((name.to_string(), e.to_string()));
            }
        }
    }

    fn set(&mut self, key: &str, v: f64) {
        self.values.insert(key.to_string(), v.is_finite().then_some(v));
    }
}

/// The WBIC chain is reused by later estimators; its error is reported by each.
fn shared(r: &Result<Chain>) -> Result<&Chain> {
    r.as_ref().map_err(|e| Error::Numerical(format!("shared chain failed: {e}")))
}

fn chain_at(model: &dyn Model, data: &Dataset, beta: f64, config: &ChainConfig, n_chains: usize) -> Result<Chain> {
    let target = TemperedTarget::new(model, data, beta)?;
    run_chains(&target, config, n_chains)
}

fn run_cell(plan: &ExperimentPlan, model: &dyn Model, fit_scale: f64, data: &Dataset, s_n: Option<f64>, seed: u64) -> CellOutput {
    let mut out = CellOutput { values: BTreeMap::new(), failures: Vec::new(), seconds: BTreeMap::new() };
    let n = data.n();
    let log_n = (n as f64).ln();
    let cfg = |stream: u64| plan.chain.with_seed(derive_seed(seed, stream));

    let need_wbic_chain = plan.wants(Estimator::Wbic)
        || (plan.wants(Estimator::Rlct) && plan.rlct.beta1_mult == 1.0 && plan.rlct.method != RlctMethod::Regression);
    let mut wbic_chain = None;
    if need_wbic_chain {
        let t = Instant::now();
        let res = chain_at(model, data, 1.0 / log_n, &cfg(0), plan.n_chains);
        if plan.wants(Estimator::Wbic) {
            let keys = ["wbic", "wbic_mcse", "wbic1"];
            let res = shared(&res).and_then(|c| crate::criteria::wbic(c, n));
            out.record("wbic", &keys[..if s_n.is_some() { 3 } else { 2 }], t, res, |o, w| {
                o.set("wbic", w.mean);
                o.set("wbic_mcse", w.mcse);
                if let Some(s) = s_n {
                    o.set("wbic1", w.mean - n as f64 * s);
                }
            });
        }
        wbic_chain = Some(res);
    }

    if plan.wants(Estimator::Rlct) {
        let t = Instant::now();
        let (b1, b2) = (plan.rlct.beta1_mult / log_n, plan.rlct.beta2_mult / log_n);
        let point = |c: &Chain| {
            let e = expected_nll(c);
            CurvePoint { beta: c.beta, mean: e.mean, mcse: e.mcse }
        };
        let chain1 = || -> Result<Chain> {
            match &wbic_chain {
                Some(r) if plan.rlct.beta1_mult == 1.0 => shared(r).cloned(),
                _ => chain_at(model, data, b1, &cfg(3), plan.n_chains),
            }
        };
        let res = match plan.rlct.method {
            RlctMethod::Reweight => chain1().and_then(|c| rlct_reweighted(&c, b2)),
            RlctMethod::TwoChain => chain1().and_then(|c1| {
                let c2 = chain_at(model, data, b2, &cfg(4), plan.n_chains)?;
                rlct_two_chain(point(&c1), point(&c2))
            }),
            RlctMethod::Regression => [b1, 0.5 * (b1 + b2), b2]
                .iter()
                .enumerate()
                .map(|(i, &b)| chain_at(model, data, b, &cfg(3 + i as u64), plan.n_chains).map(|c| point(&c)))
                .collect::<Result<Vec<_>>>()
                .and_then(|curve| rlct_regression(&curve)),
        };
        out.record("rlct", &["lambda", "lambda_se"], t, res, |o, r| {
            o.set("lambda", r.lambda_hat);
            o.set("lambda_se", r.std_error);
            if let Some(ess) = r.ess {
                o.set("lambda_ess", ess);
            }
        });
    }

    if plan.wants(Estimator::Waic) {
        let t = Instant::now();
        let res = chain_at(model, data, 1.0, &cfg(1), plan.n_chains).and_then(|c| waic(&c, model, data));
        out.record("waic", &["waic"], t, res, |o, w| {
            o.set("waic", w.value);
            o.set("waic_t", w.t_n);
            o.set("waic_v", w.v_n);
        });
    }

    if plan.wants(Estimator::Evidence) {
        let t = Instant::now();
        let res = TemperatureSchedule::power(plan.evidence_rungs, 5.0)
            .and_then(|s| stepping_stone(model, data, &s, &cfg(2)));
        out.record("evidence", &["evidence"], t, res, |o, f| {
            o.set("evidence", f.value);
            o.set("evidence_mcse", f.mcse);
        });
    }

    let (want_bic, want_aic) = (plan.wants(Estimator::Bic), plan.wants(Estimator::Aic));
    if want_bic || want_aic {
        let t = Instant::now();
        let options = FitOptions {
            mode: FitMode::Mle,
            restarts: plan.fit_restarts,
            seed: derive_seed(seed, 5),
            start_scale: fit_scale,
            ..FitOptions::default()
        };
        let keys: Vec<&str> = [("bic", want_bic), ("aic", want_aic)].iter().filter(|k| k.1).map(|k| k.0).collect();
        let res = fit_map_or_mle(model, data, &options).and_then(|w| {
            Ok((
                if want_bic { Some(bic(model, data, &w.0)?) } else { None },
                if want_aic { Some(aic(model, data, &w.0)?) } else { None },
            ))
        });
        out.record("fit", &keys, t, res, |o, (b, a)| {
            if let Some(b) = b {
                o.set("bic", b);
            }
            if let Some(a) = a {
                o.set("aic", a);
            }
        });
    }
    out
}

/// Runs every (repeat, candidate) cell in parallel. Per-estimator failures
/// are recorded in the report as missing values; only an invalid plan is an
/// error.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let specs = plan.candidates.iter().map(|c| plan.model_spec(c)).collect::<Result<Vec<_>>>()?;
    let models = specs.iter().map(|s| s.build()).collect::<Result<Vec<_>>>()?;
    let candidates: Vec<CandidateInfo> = plan
        .candidates
        .iter()
        .zip(&models)
        .zip(&specs)
        .map(|((c, m), s)| CandidateInfo {
            label: candidate_label(c),
            dim: m.dim(),
            model: Some(s.to_string()),
            theory: plan.theory(c),
        })
        .collect();

    let datasets = (0..plan.repeats)
        .into_par_iter()
        .map(|r| {
            let (data, truth) = generate_repeat(plan, r)?;
            let s_n = empirical_entropy(Some(truth.density()), &data).ok();
            Ok((data, s_n))
        })
        .collect::<Result<Vec<_>>>()?;

    let grid: Vec<(usize, usize)> = (0..plan.repeats)
        .flat_map(|r| (0..models.len()).map(move |c| (r, c)))
        .collect();
    let outputs: Vec<CellOutput> = grid
        .par_iter()
        .map(|&(r, c)| {
            let (data, s_n) = &datasets[r];
            run_cell(plan, models[c].as_ref(), specs[c].fit_start_scale(), data, *s_n, cell_seed(plan, r, c))
        })
        .collect();

    let mut cells = Vec::with_capacity(grid.len());
    let mut failures = Vec::new();
    let mut timings = Vec::new();
    for (&(repeat, candidate), out) in grid.iter().zip(outputs) {
        for (estimator, error) in out.failures {
            failures.push(Failure { repeat, candidate, estimator, error });
        }
        timings.push(CellTiming { repeat, candidate, seconds: out.seconds });
        cells.push(Cell { repeat, candidate, values: out.values });
    }
    add_baselines(plan, &mut cells);

    let mut report = ExperimentReport::assemble(Some(plan.clone()), candidates, plan.repeats, cells);
    report.failures = failures;
    report.timings = timings;
    report.provenance = Some(Provenance {
        master_seed: plan.seed,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        truth_seeds: (0..plan.repeats).map(|r| repeat_seeds(plan, r).0).collect(),
        dataset_seeds: (0..plan.repeats).map(|r| repeat_seeds(plan, r).1).collect(),
        data_fingerprints: datasets.iter().map(|(d, _)| d.fingerprint().to_string()).collect(),
        cell_seeds: (0..plan.repeats)
            .map(|r| (0..models.len()).map(|c| cell_seed(plan, r, c)).collect())
            .collect(),
    });
    Ok(report)
}

/// `wbic2` is WBIC minus the true model's WBIC in the same repeat;
/// `wbic2_min` subtracts the smallest WBIC instead.
fn add_baselines(plan: &ExperimentPlan, cells: &mut [Cell]) {
    if !plan.wants(Estimator::Wbic) {
        return;
    }
    let k = plan.candidates.len();
    let truth_idx = plan.true_candidate();
    for row in cells.chunks_mut(k) {
        let wbic: Vec<Option<f64>> = row.iter().map(|c| c.values.get("wbic").copied().flatten()).collect();
        let min = wbic.iter().copied().collect::<Option<Vec<f64>>>().map(|v| v.into_iter().fold(f64::INFINITY, f64::min));
        let base = truth_idx.map(|i| wbic[i]);
        for (cell, w) in row.iter_mut().zip(&wbic) {
            cell.values.insert("wbic2_min".into(), w.zip(min).map(|(w, m)| w - m));
            if let Some(base) = base {
                cell.values.insert("wbic2".into(), w.zip(base).map(|(w, b)| w - b));
            }
        }
    }
}
