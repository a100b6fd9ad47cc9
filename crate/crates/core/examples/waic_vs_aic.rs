//! WAIC and AIC on the per-sample scale. For a regular model the WAIC penalty
//! `V_n` is close to the AIC penalty `d`; for the singular model `N(ab, 1)` at
//! a true mean of 0 it stays near 1 while `d = 2`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use wbic::criteria::{aic, fit_map_or_mle, waic, FitOptions};
use wbic::mcmc::{run_chain, ChainConfig, TemperedTarget};
use wbic::models::{ConjugateNormalModel, Dataset, Model, PolynomialMeanModel};

fn compare(model: &dyn Model, data: &Dataset, step: f64) -> wbic::Result<()> {
    let config = ChainConfig { burn_in: 3000, thin: 5, draws: 4000, step_std_init: step, seed: 2, ..ChainConfig::default() };
    let chain = run_chain(&TemperedTarget::new(model, data, 1.0)?, &config)?;
    let w = waic(&chain, model, data)?;
    let w_hat = fit_map_or_mle(model, data, &FitOptions::default())?;
    let a = aic(model, data, w_hat.as_slice())?;
    println!(
        "{:<40} WAIC {:.5}  AIC {:.5}  penalty V_n {:.3} vs d {}",
        model.label(),
        w.value,
        a,
        w.v_n,
        model.dim()
    );
    Ok(())
}

pub fn run() -> wbic::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rows: Vec<Vec<f64>> = (0..400).map(|_| vec![StandardNormal.sample(&mut rng)]).collect();
    let data = Dataset::plain(rows)?;
    compare(&ConjugateNormalModel::new(1, 1.0, 1.0)?, &data, 0.1)?;
    compare(&PolynomialMeanModel::product(1.0)?, &data, 0.3)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> wbic::Result<()> {
    run()
}
