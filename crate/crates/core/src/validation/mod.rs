//! Representative-training-sample study: rank training points by anchor
//! value, remove them in four scenarios, retrain, and compare each
//! retrained model's samples with the original model's by Fréchet distance.

mod report;
mod schedule;
mod tracin;

pub use report::{
    run_study, run_validation, CellResult, ReportConfig, ScenarioReport, SeedSummary, StepReport,
    StudyConfig, ValidationReport, DEFAULT_GEN_SIZE, DEFAULT_STEPS, PAPER_GEN_SIZE,
};
pub use schedule::{
    build_schedules, rank_by_anchor_value, removal_count, RemovalSchedule, RemovalStep, Scenario,
};
pub use tracin::{tracin_influence, tracin_scores, InfluenceScore};
