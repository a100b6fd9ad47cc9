//! Select the rank of a reduced rank regression by WBIC. Reports WBIC,
//! WBIC minus `n S_n`, and the differences to the smallest value.

use wbic::criteria::{baseline_reports, select_model, CriterionReport};
use wbic::mcmc::{run_chain, ChainConfig, ChainInit, TemperedTarget};
use wbic::models::{empirical_entropy, generate_rrr_dataset, ReducedRankModel, RrrDataConfig};

pub fn run_with(ranks: &[usize], draws: usize) -> wbic::Result<usize> {
    let (data, truth) = generate_rrr_dataset(&RrrDataConfig::default(), 2024)?;
    let config = ChainConfig {
        burn_in: 10_000,
        thin: 20,
        draws,
        init: ChainInit::ScaledPriorDraw { scale: 0.01 },
        ..ChainConfig::default()
    };
    let mut reports = Vec::new();
    for &h in ranks {
        let model = ReducedRankModel::new(6, 6, h, 0.1, 10.0)?;
        let chain = run_chain(&TemperedTarget::wbic(&model, &data)?, &config.with_seed(h as u64))?;
        reports.push(CriterionReport::from_wbic_chain(&model, &chain)?);
    }
    let s_n = empirical_entropy(Some(&truth), &data)?;
    for row in baseline_reports(&reports, Some(s_n))? {
        println!(
            "{:<32} WBIC {:>10.2}  WBIC - nS_n {:>8.2}  vs best {:>7.2}",
            row.label,
            row.wbic,
            row.wbic1.unwrap_or(f64::NAN),
            row.wbic2
        );
    }
    let chosen = select_model(&reports)?;
    println!("selected: {}", chosen.label);
    Ok(ranks[chosen.index])
}

pub fn run() -> wbic::Result<()> {
    run_with(&[1, 2, 3, 4, 5, 6], 2000).map(|_| ())
}

#[allow(dead_code)]
fn main() -> wbic::Result<()> {
    run()
}
