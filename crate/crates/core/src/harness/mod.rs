//! Experiment orchestration: plans, parallel sweeps, and reports.

mod plan;
mod report;
mod run;
mod spec;

pub use plan::{Candidate, Estimator, ExperimentPlan, RlctOptions, TruthConfig, TruthMode};
pub use report::{
    Aggregate, CandidateInfo, Cell, CellTiming, ExperimentReport, Failure, Provenance, ReportFormat, SelectionCount,
    render_report, SELECTION_KEYS,
};
pub use run::{cell_seed, generate_repeat, repeat_seeds, run_experiment, Truth};
pub use spec::ModelSpec;
