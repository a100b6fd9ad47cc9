//! Run a small JSON-described experiment through the harness and print the
//! report in all three formats.

use wbic::harness::{render_report, run_experiment, ExperimentPlan, ExperimentReport, ReportFormat};

const PLAN: &str = r#"{
  "truth": { "family": "conjugate", "dim": 2, "noise_std": 1.0, "mean": 0.3 },
  "candidates": [ { "kind": "conjugate", "prior_std": 0.1 }, { "kind": "conjugate", "prior_std": 1.0 } ],
  "n": 200,
  "repeats": 3,
  "chain": { "burn_in": 1000, "thin": 2, "draws": 1000, "step_std_init": 0.1, "seed": 0 },
  "estimators": ["wbic", "waic", "bic", "evidence"],
  "evidence_rungs": 10,
  "seed": 42
}"#;

pub fn run() -> wbic::Result<ExperimentReport> {
    let plan: ExperimentPlan = serde_json::from_str(PLAN)?;
    let report = run_experiment(&plan)?;
    print!("{}", String::from_utf8_lossy(&render_report(&report, ReportFormat::Text)?));
    let csv = render_report(&report, ReportFormat::Csv)?;
    println!("csv: {} rows", String::from_utf8_lossy(&csv).lines().count() - 1);
    let back = ExperimentReport::from_csv(&csv)?;
    assert_eq!(back.aggregates.len(), report.aggregates.len());
    println!("json: {} bytes", render_report(&report, ReportFormat::Json)?.len());
    Ok(report)
}

#[allow(dead_code)]
fn main() -> wbic::Result<()> {
    run().map(|_| ())
}
