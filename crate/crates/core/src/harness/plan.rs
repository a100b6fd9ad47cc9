//! Experiment plans: a truth, a candidate list, and which estimators to run.

use serde::{Deserialize, Serialize};

use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::mcmc::{ChainConfig, ChainInit};
use crate::models::{theoretical_rlct_rrr, RrrDataConfig, TheoryRlct};
use crate::rlct::RlctMethod;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TruthConfig {
    Rrr {
        inputs: usize,
        outputs: usize,
        true_rank: usize,
        sigma: f64,
        x_std: f64,
        coef_std: f64,
    },
    /// Data `N(mean·1, noise_std² I)` in `dim` dimensions.
    Conjugate {
        dim: usize,
        noise_std: f64,
        #[serde(default)]
        mean: f64,
    },
}

impl TruthConfig {
    pub fn rrr_data_config(&self, n: usize) -> Option<RrrDataConfig> {
        match *self {
            TruthConfig::Rrr { inputs, outputs, true_rank, sigma, x_std, coef_std } => {
                Some(RrrDataConfig { inputs, outputs, true_rank, n, sigma, x_std, coef_std })
            }
            TruthConfig::Conjugate { .. } => None,
        }
    }
}

/// One model in the sweep. RRR candidates take `M`, `N`, `σ` from the truth;
/// conjugate candidates take `d` and the noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Candidate {
    Rank {
        rank: usize,
        #[serde(default = "default_rrr_prior_std")]
        prior_std: f64,
    },
    Conjugate {
        #[serde(default = "one")]
        prior_std: f64,
    },
}

fn default_rrr_prior_std() -> f64 {
    10.0
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Wbic,
    Waic,
    Rlct,
    Evidence,
    Bic,
    Aic,
}

/// Whether `A₀`, `B₀` are drawn once for the whole experiment or per repeat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthMode {
    #[default]
    Fixed,
    Redraw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RlctOptions {
    pub method: RlctMethod,
    /// `β₁ = beta1_mult / log n`.
    pub beta1_mult: f64,
    pub beta2_mult: f64,
}

impl Default for RlctOptions {
    fn default() -> Self {
        RlctOptions { method: RlctMethod::Reweight, beta1_mult: 1.0, beta2_mult: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub truth: TruthConfig,
    pub candidates: Vec<Candidate>,
    pub n: usize,
    pub repeats: usize,
    pub chain: ChainConfig,
    #[serde(default = "one_usize")]
    pub n_chains: usize,
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub truth_mode: TruthMode,
    #[serde(default)]
    pub rlct: RlctOptions,
    /// Rungs in the `(j/J)^5` stepping-stone ladder.
    #[serde(default = "twenty")]
    pub evidence_rungs: usize,
    #[serde(default = "four")]
    pub fit_restarts: usize,
    #[serde(default)]
    pub paper_exact: bool,
}

fn one_usize() -> usize {
    1
}

fn twenty() -> usize {
    20
}

fn four() -> usize {
    4
}

impl ExperimentPlan {
    /// The published reduced rank regression sweep at desk scale: ten
    /// repeats and 20 000 burn-in steps instead of 100 and 50 000.
    pub fn desk() -> Self {
        let truth = RrrDataConfig::default();
        ExperimentPlan {
            truth: TruthConfig::Rrr {
                inputs: truth.inputs,
                outputs: truth.outputs,
                true_rank: truth.true_rank,
                sigma: truth.sigma,
                x_std: truth.x_std,
                coef_std: truth.coef_std,
            },
            candidates: (1..=6).map(|rank| Candidate::Rank { rank, prior_std: 10.0 }).collect(),
            n: truth.n,
            repeats: 10,
            chain: ChainConfig {
                burn_in: 20_000,
                init: ChainInit::ScaledPriorDraw { scale: 0.01 },
                ..ChainConfig::default()
            },
            n_chains: 1,
            estimators: vec![Estimator::Wbic, Estimator::Rlct],
            seed: 0,
            truth_mode: TruthMode::Fixed,
            rlct: RlctOptions::default(),
            evidence_rungs: 20,
            fit_restarts: 4,
            paper_exact: false,
        }
    }

    /// Restores the published repeat count and sampler lengths.
    pub fn into_paper_exact(mut self) -> Self {
        let published = ChainConfig::default();
        self.repeats = 100;
        self.chain.burn_in = published.burn_in;
        self.chain.thin = published.thin;
        self.chain.draws = published.draws;
        self.chain.step_std_init = published.step_std_init;
        self.paper_exact = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        if self.candidates.is_empty() {
            return Err(Error::Config("candidates must be nonempty".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("estimators must be nonempty".into()));
        }
        if self.n < 3 {
            return Err(Error::Config("n must be >= 3".into()));
        }
        if self.n_chains < 1 || self.evidence_rungs < 1 || self.fit_restarts < 1 {
            return Err(Error::Config("n_chains, evidence_rungs and fit_restarts must be >= 1".into()));
        }
        if !(self.rlct.beta1_mult > 0.0 && self.rlct.beta2_mult > 0.0) {
            return Err(Error::Config("rlct beta multipliers must be positive".into()));
        }
        self.chain.validate()?;
        if let Some(cfg) = self.truth.rrr_data_config(self.n) {
            cfg.validate()?;
        }
        for c in &self.candidates {
            self.model_spec(c)?.build()?;
        }
        Ok(())
    }

    pub fn model_spec(&self, candidate: &Candidate) -> Result<ModelSpec> {
        match (&self.truth, candidate) {
            (TruthConfig::Rrr { inputs, outputs, sigma, .. }, Candidate::Rank { rank, prior_std }) => Ok(ModelSpec::Rrr {
                inputs: *inputs,
                outputs: *outputs,
                rank: *rank,
                sigma: *sigma,
                prior_std: *prior_std,
            }),
            (TruthConfig::Conjugate { dim, noise_std, .. }, Candidate::Conjugate { prior_std }) => {
                Ok(ModelSpec::Conjugate { dim: *dim, noise_std: *noise_std, prior_std: *prior_std })
            }
            _ => Err(Error::Config("candidate kind does not match truth family".into())),
        }
    }

    /// Reference λ where one is known.
    pub fn theory(&self, candidate: &Candidate) -> Option<TheoryRlct> {
        match (&self.truth, candidate) {
            (TruthConfig::Rrr { inputs, outputs, true_rank, .. }, Candidate::Rank { rank, .. }) => {
                theoretical_rlct_rrr(*inputs, *outputs, *rank, *true_rank)
            }
            (TruthConfig::Conjugate { dim, .. }, Candidate::Conjugate { .. }) => {
                Some(TheoryRlct { lambda: *dim as f64 / 2.0, multiplicity: 1 })
            }
            _ => None,
        }
    }

    /// Index of the candidate that matches the generating model.
    pub fn true_candidate(&self) -> Option<usize> {
        match &self.truth {
            TruthConfig::Rrr { true_rank, .. } => self
                .candidates
                .iter()
                .position(|c| matches!(c, Candidate::Rank { rank, .. } if rank == true_rank)),
            TruthConfig::Conjugate { .. } => None,
        }
    }

    pub fn wants(&self, e: Estimator) -> bool {
        self.estimators.contains(&e)
    }
}
