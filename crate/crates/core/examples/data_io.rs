//! Write a simulated dataset, its generating truth and a chain dump to disk,
//! then read them back.

use std::fs::File;
use std::io::BufWriter;

use wbic::io::{load_dataset, read_truth_json, save_dataset, write_truth_json};
use wbic::mcmc::{read_chain_binary, run_chain, write_chain_binary, write_chain_csv, ChainConfig, ChainInit, ChainSidecar, TemperedTarget};
use wbic::models::{generate_rrr_dataset, ReducedRankModel, RrrDataConfig};

pub fn run_in(dir: &std::path::Path) -> wbic::Result<()> {
    let config = RrrDataConfig { n: 100, ..RrrDataConfig::default() };
    let (data, truth) = generate_rrr_dataset(&config, 1)?;

    let data_path = dir.join("data.csv");
    save_dataset(&data, &data_path)?;
    let back = load_dataset(&data_path)?;
    assert_eq!(back.fingerprint(), data.fingerprint());

    let truth_path = dir.join("truth.json");
    write_truth_json(&truth, BufWriter::new(File::create(&truth_path)?))?;
    let truth_back = read_truth_json(File::open(&truth_path)?)?;
    assert_eq!(truth_back.true_rank(), truth.true_rank());

    let model = ReducedRankModel::new(6, 6, 3, 0.1, 10.0)?;
    let chain_config = ChainConfig {
        burn_in: 2000,
        thin: 5,
        draws: 200,
        init: ChainInit::ScaledPriorDraw { scale: 0.01 },
        ..ChainConfig::default()
    };
    let chain = run_chain(&TemperedTarget::wbic(&model, &back)?, &chain_config)?;
    write_chain_csv(&chain, File::create(dir.join("chain.csv"))?)?;
    let bin_path = dir.join("chain.bin");
    write_chain_binary(&chain, BufWriter::new(File::create(&bin_path)?))?;
    let sidecar = ChainSidecar::from(&chain);
    std::fs::write(dir.join("chain.bin.json"), serde_json::to_string_pretty(&sidecar)?)?;

    let dump = read_chain_binary(File::open(&bin_path)?)?;
    assert_eq!(dump.nll, chain.nll);
    println!("dataset: {} records, fingerprint {}", back.n(), back.fingerprint());
    println!("truth: rank {} ({}x{})", truth_back.true_rank(), truth_back.outputs(), truth_back.inputs());
    println!(
        "chain: {} draws of d = {}, acceptance {:.2}, files in {}",
        dump.nll.len(),
        dump.dim,
        sidecar.acceptance_rate,
        dir.display()
    );
    Ok(())
}

pub fn run() -> wbic::Result<()> {
    let dir = std::env::temp_dir().join(format!("wbic-data-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    run_in(&dir)
}

#[allow(dead_code)]
fn main() -> wbic::Result<()> {
    run()
}
