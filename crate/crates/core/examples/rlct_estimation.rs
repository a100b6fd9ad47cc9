//! Estimate the learning coefficient λ of reduced rank regression models from
//! one WBIC chain (importance reweighting) and from two chains at different
//! temperatures, and compare with the known values.

use wbic::free_energy::CurvePoint;
use wbic::mcmc::{expected_nll, run_chain, ChainConfig, ChainInit, TemperedTarget};
use wbic::models::{generate_rrr_dataset, theoretical_rlct_rrr, ReducedRankModel, RrrDataConfig};
use wbic::rlct::{rlct_reweighted, rlct_two_chain};

pub fn run_with(ranks: &[usize], draws: usize) -> wbic::Result<Vec<(usize, f64)>> {
    let (data, _) = generate_rrr_dataset(&RrrDataConfig::default(), 7)?;
    let log_n = (data.n() as f64).ln();
    let (beta1, beta2) = (1.0 / log_n, 1.5 / log_n);
    let config = ChainConfig {
        burn_in: 10_000,
        thin: 20,
        draws,
        init: ChainInit::ScaledPriorDraw { scale: 0.01 },
        ..ChainConfig::default()
    };
    let mut out = Vec::new();
    println!("{:>3} {:>14} {:>14} {:>8}", "H", "reweighted", "two chains", "theory");
    for &h in ranks {
        let model = ReducedRankModel::new(6, 6, h, 0.1, 10.0)?;
        let c1 = run_chain(&TemperedTarget::new(&model, &data, beta1)?, &config.with_seed(10 + h as u64))?;
        let c2 = run_chain(&TemperedTarget::new(&model, &data, beta2)?, &config.with_seed(20 + h as u64))?;
        let one = rlct_reweighted(&c1, beta2)?;
        let point = |c: &wbic::mcmc::Chain, beta| {
            let e = expected_nll(c);
            CurvePoint { beta, mean: e.mean, mcse: e.mcse }
        };
        let two = rlct_two_chain(point(&c1, beta1), point(&c2, beta2))?;
        let theory = theoretical_rlct_rrr(6, 6, h, 3).map(|t| t.lambda).unwrap_or(f64::NAN);
        println!(
            "{h:>3} {:>8.2}±{:<5.2} {:>8.2}±{:<5.2} {theory:>8.1}",
            one.lambda_hat, one.std_error, two.lambda_hat, two.std_error
        );
        out.push((h, one.lambda_hat));
    }
    Ok(out)
}

pub fn run() -> wbic::Result<()> {
    run_with(&[1, 2, 3, 4, 5, 6], 2000).map(|_| ())
}

#[allow(dead_code)]
fn main() -> wbic::Result<()> {
    run()
}
