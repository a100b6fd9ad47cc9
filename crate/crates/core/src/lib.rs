//! Bayesian evaluation of singular statistical models.
//!
//! The crate estimates the Bayes free energy `F = −log ∫ Π p(Xᵢ|w) φ(w) dw`
//! with WBIC, the posterior mean of `n L_n(w)` at inverse temperature
//! `β = 1/log n`, and estimates the real log canonical threshold λ from
//! posterior means at two temperatures. Exact references are built in for
//! checking: closed forms for a conjugate normal model, grid quadrature for
//! models with up to three parameters, and stepping-stone integration over a
//! temperature ladder.
//!
//! Modules:
//! - [`models`]: the [`models::Model`] trait, datasets, reduced rank regression and the conjugate oracle model
//! - [`mcmc`]: tempered random-walk Metropolis, expectations and diagnostics
//! - [`quadrature`]: grid integration of tempered posteriors
//! - [`criteria`]: WBIC, WAIC, BIC, AIC and model selection
//! - [`free_energy`]: stepping-stone free energy and the optimal inverse temperature
//! - [`rlct`]: RLCT estimators
//! - [`harness`]: repeated simulation studies and report rendering
//!
//! Start with the examples (`cargo run --release --example <name>`):
//! `conjugate_oracles`, `wbic_model_selection`, `rlct_estimation`,
//! `stepping_stone_evidence`, `optimal_temperature`, `quadrature_monotonicity`,
//! `waic_vs_aic`, `data_io`, `experiment_plan`, `table_reproduction`.

pub mod criteria;
pub mod error;
pub mod free_energy;
pub mod harness;
pub mod io;
pub mod mcmc;
pub mod models;
pub mod numeric;
pub mod optimize;
pub mod quadrature;
pub mod rlct;

pub use error::{Error, Result, Warning};
