//! Three ways to get `E^β[n L_n]` and `log Z(β)` for a conjugate normal
//! model: the closed form, grid quadrature, and a Metropolis chain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wbic::mcmc::{expected_nll, run_chain, ChainConfig, TemperedTarget};
use wbic::models::{ConjugateNormalModel, ConjugateTruth, Model};
use wbic::quadrature::{grid_expected_nll, grid_log_partition, GridSpec};

pub fn run() -> wbic::Result<()> {
    let model = ConjugateNormalModel::new(2, 1.0, 1.0)?;
    let truth = ConjugateTruth { mean: vec![0.3, -0.7], noise_std: 1.0 };
    let data = truth.sample(200, &mut ChaCha8Rng::seed_from_u64(1))?;
    let oracle = model.oracle().expect("conjugate family has a closed form");
    let grid = GridSpec::around_prior(2, 1.0)?;
    let config = ChainConfig { burn_in: 2000, thin: 5, draws: 4000, step_std_init: 0.1, seed: 7, ..ChainConfig::default() };

    println!("{:>6} {:>14} {:>14} {:>14} {:>10}", "beta", "closed form", "grid", "chain", "mcse");
    for beta in [0.05, 1.0 / (200f64).ln(), 0.5, 1.0] {
        let exact = oracle.expected_nll(beta, &data)?;
        let grid_value = grid_expected_nll(&model, &data, beta, &grid)?.value;
        let chain = run_chain(&TemperedTarget::new(&model, &data, beta)?, &config)?;
        let e = expected_nll(&chain);
        println!("{beta:>6.3} {exact:>14.6} {grid_value:>14.6} {:>14.6} {:>10.4}", e.mean, e.mcse);
    }
    let f = -oracle.log_partition(1.0, &data)?;
    let f_grid = -grid_log_partition(&model, &data, 1.0, &grid)?.value;
    println!("free energy: closed form {f:.8}, grid {f_grid:.8}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> wbic::Result<()> {
    run()
}
