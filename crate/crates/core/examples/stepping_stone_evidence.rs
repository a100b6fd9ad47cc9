//! Free energy `F = −log Z` by stepping-stone sampling over a `(j/J)^5`
//! temperature ladder, next to the closed form and to WBIC.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wbic::criteria::wbic;
use wbic::free_energy::{stepping_stone, ClosedFormSource, TemperatureSchedule};
use wbic::mcmc::{run_chain, ChainConfig, TemperedTarget};
use wbic::models::{ConjugateNormalModel, ConjugateTruth};

pub fn run() -> wbic::Result<()> {
    let model = ConjugateNormalModel::new(3, 1.0, 1.0)?;
    let data = ConjugateTruth { mean: vec![0.5, 0.0, -0.5], noise_std: 1.0 }
        .sample(300, &mut ChaCha8Rng::seed_from_u64(3))?;
    let config = ChainConfig { burn_in: 2000, thin: 3, draws: 3000, step_std_init: 0.1, seed: 5, ..ChainConfig::default() };

    let exact = ClosedFormSource::for_model(&model, &data)?.free_energy()?;
    for rungs in [10, 20, 40] {
        let schedule = TemperatureSchedule::power(rungs, 5.0)?;
        let est = stepping_stone(&model, &data, &schedule, &config)?;
        let min_ess = est.ess.iter().copied().fold(f64::INFINITY, f64::min);
        println!(
            "J = {rungs:>2}: F = {:.4} ± {:.4} (min rung ESS {min_ess:.0}, {} steps)",
            est.value, est.mcse, est.total_steps
        );
    }
    let chain = run_chain(&TemperedTarget::wbic(&model, &data)?, &config)?;
    let w = wbic(&chain, data.n())?;
    println!("closed form F = {exact:.4}");
    println!("WBIC          = {:.4} ± {:.4}", w.mean, w.mcse);
    Ok(())
}

#[allow(dead_code)]
fn main() -> wbic::Result<()> {
    run()
}
