//! Find the inverse temperature `β*` at which `E^β[n L_n]` equals the free
//! energy exactly, and watch `β* log n` approach 1 as `n` grows.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wbic::free_energy::{optimal_beta, optimal_beta_with, ClosedFormSource};
use wbic::mcmc::ChainConfig;
use wbic::models::{ConjugateNormalModel, ConjugateTruth};

pub fn run() -> wbic::Result<()> {
    let model = ConjugateNormalModel::new(2, 1.0, 1.0)?;
    let truth = ConjugateTruth { mean: vec![0.4, -0.2], noise_std: 1.0 };
    println!("{:>7} {:>10} {:>12} {:>10}", "n", "beta*", "beta* log n", "chain");
    for (i, n) in [50usize, 500, 5000, 50_000].into_iter().enumerate() {
        let data = truth.sample(n, &mut ChaCha8Rng::seed_from_u64(i as u64))?;
        let source = ClosedFormSource::for_model(&model, &data)?;
        let f = source.free_energy()?;
        let exact = optimal_beta_with(&source, f, (1e-4, 1.0), 1e-10)?;
        let sampled = if n <= 500 {
            let config = ChainConfig { burn_in: 2000, thin: 5, draws: 3000, step_std_init: 0.2, seed: 9, ..ChainConfig::default() };
            format!("{:.4}", optimal_beta(&model, &data, f, &config, 1e-4)?.beta_star)
        } else {
            "-".into()
        };
        println!("{n:>7} {:>10.5} {:>12.4} {sampled:>10}", exact.beta_star, exact.beta_star_times_log_n);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> wbic::Result<()> {
    run()
}
