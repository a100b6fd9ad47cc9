//! The reduced rank regression sweep: six candidate ranks against a rank-3
//! truth, with WBIC baselines, λ estimates and selection counts. Pass
//! `--paper-exact` for the full 100-repeat run (slow).

use wbic::harness::{run_experiment, ExperimentPlan, ExperimentReport};

pub fn run_with(repeats: usize, paper_exact: bool) -> wbic::Result<ExperimentReport> {
    let mut plan = ExperimentPlan::desk();
    if paper_exact {
        plan = plan.into_paper_exact();
    } else {
        plan.repeats = repeats;
    }
    let report = run_experiment(&plan)?;
    print!("{}", report.to_text());
    Ok(report)
}

pub fn run() -> wbic::Result<()> {
    let paper_exact = std::env::args().any(|a| a == "--paper-exact");
    run_with(10, paper_exact).map(|_| ())
}

#[allow(dead_code)]
fn main() -> wbic::Result<()> {
    run()
}
